//! JSON experiment configuration and its validation.

use std::path::Path;

use degenrd_core::grid::{Field, FieldSet, Grid};
use degenrd_core::kinetics::{RegIndex, RegularizedRates};
use degenrd_core::model::{classify, sc_check, TriangularSystem};
use degenrd_core::stepper::StepperConfig;
use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables, DefaultNumericTypes, Function,
    HashMapContext, Value,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Exponents of the reactants; the product exponent is 1.
    pub alpha: Vec<f64>,
    /// One coefficient per species, product last.
    pub diffusion: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lengths: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        value: f64,
    },
    /// `base * (1 + amplitude * prod_axis cos(k_axis pi x_axis / L_axis))`.
    Cosine {
        base: f64,
        amplitude: f64,
        waves: Vec<usize>,
    },
    /// Expression in `x`, `y`, `pi`, `Lx`, `Ly`, evaluated at cell centers.
    Expression {
        expr: String,
    },
    /// Cell values in storage order.
    Values {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverSpec {
    pub record_every: usize,
    pub lp_exponents: Vec<f64>,
}

impl Default for ObserverSpec {
    fn default() -> Self {
        Self {
            record_every: 10,
            lp_exponents: vec![4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshStudySpec {
    /// Cells per axis on each level; consecutive levels differ by a factor 2.
    pub levels: Vec<usize>,
    /// Horizon of the study runs; the experiment horizon when absent.
    pub t_final: Option<f64>,
    /// Base step of the time study; the stepper step when absent.
    pub time_dt: Option<f64>,
    pub dt_divisors: Vec<usize>,
    pub reference_divisor: usize,
}

impl Default for MeshStudySpec {
    fn default() -> Self {
        Self {
            levels: vec![32, 64, 128],
            t_final: None,
            time_dt: None,
            dt_divisors: vec![1, 2, 4],
            reference_divisor: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub system: SystemSpec,
    pub grid: GridSpec,
    /// One entry per species.
    pub initial: Vec<InitialSpec>,
    #[serde(default)]
    pub stepper: StepperConfig,
    #[serde(default = "default_n_values")]
    pub n_values: Vec<RegIndex>,
    pub t_final: f64,
    #[serde(default)]
    pub observer: ObserverSpec,
    #[serde(default)]
    pub mesh_study: MeshStudySpec,
    /// Seed for randomized suites.
    #[serde(default)]
    pub seed: u64,
}

fn default_n_values() -> Vec<RegIndex> {
    vec![RegIndex::Infinite]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path.is_empty() { "config".to_string() } else { path }, e.inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::from_json(&text)
    }

    pub fn system(&self) -> Result<TriangularSystem, CliError> {
        TriangularSystem::from_reactants(&self.system.alpha, self.system.diffusion.clone())
            .map_err(|e| CliError::config("system", e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Grid::new(&self.grid.lengths, &self.grid.cells).map_err(|e| CliError::config("grid", e.to_string()))
    }

    pub fn rates(&self, n: RegIndex) -> Result<RegularizedRates, CliError> {
        Ok(RegularizedRates::new(self.system()?, n))
    }

    /// Same experiment with `cells` per axis.
    pub fn with_cells(&self, cells: usize) -> Self {
        let mut c = self.clone();
        c.grid.cells = vec![cells; c.grid.lengths.len()];
        c
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let system = self.system()?;
        let grid = self.grid()?;
        if self.initial.len() != system.species() {
            return Err(CliError::config(
                "initial",
                format!("{} entries for {} species", self.initial.len(), system.species()),
            ));
        }
        self.stepper
            .validate()
            .map_err(|e| CliError::config("stepper", e.to_string()))?;
        if self.n_values.is_empty() {
            return Err(CliError::config("n_values", "at least one regularization index is required"));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(CliError::config("t_final", "must be finite and nonnegative"));
        }
        if self.observer.record_every == 0 {
            return Err(CliError::config("observer.record_every", "must be positive"));
        }
        for (k, p) in self.observer.lp_exponents.iter().enumerate() {
            if !(p.is_finite() && *p >= 1.0) {
                return Err(CliError::config(format!("observer.lp_exponents[{k}]"), "must be finite and at least 1"));
            }
        }
        if let Some(t) = self.mesh_study.t_final {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::config("mesh_study.t_final", "must be positive"));
            }
        }
        if let Some(dt) = self.mesh_study.time_dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(CliError::config("mesh_study.time_dt", "must be positive"));
            }
        }
        if self.mesh_study.dt_divisors.contains(&0) || self.mesh_study.reference_divisor == 0 {
            return Err(CliError::config("mesh_study", "divisors must be positive"));
        }
        let verdict = sc_check(&system, &classify(&system));
        if !verdict.holds {
            log::warn!("stoichiometric condition fails: {}", verdict.reason);
        }
        initial_data(self, grid)?;
        Ok(())
    }
}

fn expression_context(grid: &Grid) -> Result<HashMapContext<DefaultNumericTypes>, String> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    ctx.set_value("pi".into(), Value::from_float(std::f64::consts::PI))
        .map_err(|e| e.to_string())?;
    ctx.set_value("Lx".into(), Value::from_float(grid.lengths()[0]))
        .map_err(|e| e.to_string())?;
    let ly = if grid.dimension() == 2 { grid.lengths()[1] } else { 0.0 };
    ctx.set_value("Ly".into(), Value::from_float(ly)).map_err(|e| e.to_string())?;
    type Unary = fn(f64) -> f64;
    let unary: [(&str, Unary); 8] = [
        ("cos", f64::cos),
        ("sin", f64::sin),
        ("exp", f64::exp),
        ("sqrt", f64::sqrt),
        ("ln", f64::ln),
        ("abs", f64::abs),
        ("tanh", f64::tanh),
        ("cosh", f64::cosh),
    ];
    for (name, f) in unary {
        ctx.set_function(
            name.into(),
            Function::new(move |arg: &Value<DefaultNumericTypes>| Ok(Value::from_float(f(arg.as_number()?)))),
        )
        .map_err(|e| e.to_string())?;
    }
    Ok(ctx)
}

fn evaluate_expression(expr: &str, grid: Grid) -> Result<Vec<f64>, String> {
    let tree = build_operator_tree::<DefaultNumericTypes>(expr).map_err(|e| e.to_string())?;
    let mut ctx = expression_context(&grid)?;
    (0..grid.cell_count())
        .map(|c| {
            let p = grid.cell_center(c);
            ctx.set_value("x".into(), Value::from_float(p[0])).map_err(|e| e.to_string())?;
            ctx.set_value("y".into(), Value::from_float(p[1])).map_err(|e| e.to_string())?;
            tree.eval_number_with_context(&ctx).map_err(|e| e.to_string())
        })
        .collect()
}

fn species_field(spec: &InitialSpec, grid: Grid) -> Result<Field, String> {
    let field = match spec {
        InitialSpec::Constant { value } => Field::constant(grid, *value),
        InitialSpec::Cosine { base, amplitude, waves } => {
            if waves.len() != grid.dimension() {
                return Err(format!("{} wave numbers for a {}D grid", waves.len(), grid.dimension()));
            }
            Field::from_fn(grid, |p| {
                let mut wave = 1.0;
                for (axis, &k) in waves.iter().enumerate() {
                    wave *= (k as f64 * std::f64::consts::PI * p[axis] / grid.lengths()[axis]).cos();
                }
                base * (1.0 + amplitude * wave)
            })
        }
        InitialSpec::Expression { expr } => Field::new(grid, evaluate_expression(expr, grid)?).map_err(|e| e.to_string())?,
        InitialSpec::Values { values } => Field::new(grid, values.clone()).map_err(|e| e.to_string())?,
    };
    if let Some((cell, v)) = field.values().iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(format!("value {v} at cell {cell} is not a nonnegative number"));
    }
    Ok(field)
}

/// Initial fields of `config` on `grid`.
pub fn initial_data(config: &ExperimentConfig, grid: Grid) -> Result<FieldSet, CliError> {
    let fields = config
        .initial
        .iter()
        .enumerate()
        .map(|(i, spec)| species_field(spec, grid).map_err(|m| CliError::config(format!("initial[{i}]"), m)))
        .collect::<Result<Vec<_>, _>>()?;
    FieldSet::new(fields).map_err(|e| CliError::config("initial", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "system": {"alpha": [1, 1], "diffusion": [1, 1, 0]},
        "grid": {"lengths": [1], "cells": [8]},
        "initial": [
            {"kind": "constant", "value": 1},
            {"kind": "cosine", "base": 1, "amplitude": 0.5, "waves": [1]},
            {"kind": "expression", "expr": "0.5 + 0.25 * cos(pi * x / Lx)"}
        ],
        "t_final": 1,
        "n_values": [10, "inf"]
    }"#;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.n_values, vec![RegIndex::Finite(10.0), RegIndex::Infinite]);
        let data = initial_data(&c, c.grid().unwrap()).unwrap();
        let x0 = c.grid().unwrap().cell_center(0)[0];
        assert!((data.field(2).values()[0] - (0.5 + 0.25 * (std::f64::consts::PI * x0).cos())).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_field_paths() {
        let bad = MINIMAL.replace("\"value\": 1", "\"value\": -1");
        match ExperimentConfig::from_json(&bad) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "initial[0]"),
            other => panic!("{other:?}"),
        }
        let typo = MINIMAL.replace("\"t_final\": 1", "\"t_final\": \"soon\"");
        match ExperimentConfig::from_json(&typo) {
            Err(CliError::Config { path, .. }) => assert_eq!(path, "t_final"),
            other => panic!("{other:?}"),
        }
        let unknown = MINIMAL.replace("\"t_final\": 1", "\"t_final\": 1, \"stepper\": {\"dtt\": 1}");
        match ExperimentConfig::from_json(&unknown) {
            Err(CliError::Config { path, .. }) => assert!(path.starts_with("stepper"), "{path}"),
            other => panic!("{other:?}"),
        }
        let empty = MINIMAL.replace("[10, \"inf\"]", "[]");
        assert!(matches!(ExperimentConfig::from_json(&empty), Err(CliError::Config { .. })));
    }

    #[test]
    fn bad_expression_is_a_config_error() {
        let bad = MINIMAL.replace("0.5 + 0.25 * cos(pi * x / Lx)", "0.5 + * q");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(CliError::Config { .. })));
    }
}
