//! `study-mesh`: self-convergence in space and in time.

use std::f64::consts::PI;
use std::path::Path;

use degenrd_core::diagnostics::entropy;
use degenrd_core::grid::{FieldSet, Grid};
use degenrd_core::stepper::{DiffusionScheme, ReactionSolver, RunOutput, Splitting, StepperConfig};
use serde::Serialize;

use crate::config::{ExperimentConfig, InitialSpec};
use crate::error::CliError;
use crate::run::{create_dir, csv_writer, execute_run, map_runs, run_options, write_json, RunStatus, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpaceRow {
    pub cells: usize,
    pub h: f64,
    pub dt: f64,
    /// `sup |u_h - coarsen(u_{h/2})|`; absent on the finest level.
    pub self_difference: Option<f64>,
    pub self_order: Option<f64>,
    /// Sup distance to the exact solution, when one is available.
    pub analytic_error: Option<f64>,
    pub analytic_order: Option<f64>,
    pub entropy: f64,
    pub entropy_difference: Option<f64>,
    pub entropy_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeRow {
    pub splitting: Splitting,
    pub divisor: usize,
    pub dt: f64,
    /// Sup distance at the final time to the run with the reference step.
    pub error: f64,
    /// Ratio to the error of the previous (larger) step.
    pub ratio: Option<f64>,
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshSummary {
    pub schema_version: u32,
    pub name: String,
    pub t_final: f64,
    pub space: Vec<SpaceRow>,
    pub time: Vec<TimeRow>,
    pub all_invariants_held: bool,
}

impl MeshSummary {
    /// Last measured space order, analytic when available.
    pub fn space_order(&self) -> Option<f64> {
        let analytic = self.space.iter().filter_map(|r| r.analytic_order).next_back();
        analytic.or_else(|| self.space.iter().filter_map(|r| r.self_order).next_back())
    }

    pub fn time_rows(&self, splitting: Splitting) -> impl Iterator<Item = &TimeRow> {
        self.time.iter().filter(move |r| r.splitting == splitting)
    }
}

fn sup_difference(a: &FieldSet, b: &FieldSet) -> f64 {
    a.fields()
        .iter()
        .zip(b.fields())
        .flat_map(|(x, y)| x.values().iter().zip(y.values()).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

fn order(coarse: f64, fine: f64, factor: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0).then(|| (coarse / fine).ln() / factor.ln())
}

/// Exact solution of the reaction-free problem for cosine or constant data.
fn analytic_solution(config: &ExperimentConfig, grid: Grid, t: f64) -> Option<FieldSet> {
    if config.stepper.reactions_enabled {
        return None;
    }
    let fields = config
        .initial
        .iter()
        .zip(&config.system.diffusion)
        .map(|(spec, &d)| match spec {
            InitialSpec::Constant { value } => Some(degenrd_core::grid::Field::constant(grid, *value)),
            InitialSpec::Cosine { base, amplitude, waves } => {
                let lambda: f64 = waves
                    .iter()
                    .zip(grid.lengths())
                    .map(|(&k, &l)| (k as f64 * PI / l).powi(2))
                    .sum();
                let decay = (-d * lambda * t).exp();
                Some(degenrd_core::grid::Field::from_fn(grid, |p| {
                    let mut wave = 1.0;
                    for (axis, &k) in waves.iter().enumerate() {
                        wave *= (k as f64 * PI * p[axis] / grid.lengths()[axis]).cos();
                    }
                    base * (1.0 + amplitude * decay * wave)
                }))
            }
            _ => None,
        })
        .collect::<Option<Vec<_>>>()?;
    FieldSet::new(fields).ok()
}

fn finish(config: &ExperimentConfig, t_final: f64) -> impl Fn(&ExperimentConfig) -> Result<Option<RunOutput>, CliError> + Sync + '_ {
    move |c: &ExperimentConfig| {
        let n = *config.n_values.last().unwrap_or(&degenrd_core::kinetics::RegIndex::Infinite);
        let mut options = run_options(c, t_final, false);
        options.record_every = usize::MAX;
        let r = execute_run(c, n, &options, None)?;
        Ok((r.summary.status == RunStatus::Ok).then_some(r.output).flatten())
    }
}

/// The splitting pair compared by the time study.
pub fn splitting_config(base: &StepperConfig, splitting: Splitting, dt: f64) -> StepperConfig {
    let (reaction_solver, diffusion_scheme) = match splitting {
        Splitting::Lie => (ReactionSolver::CellNewton, DiffusionScheme::BackwardEuler),
        Splitting::Strang => (ReactionSolver::CellNewtonRichardson, DiffusionScheme::Exponential),
    };
    StepperConfig {
        dt,
        splitting,
        reaction_solver,
        diffusion_scheme,
        dt_safety: 1.0,
        ..base.clone()
    }
}

pub fn study_mesh(config: &ExperimentConfig, out: &Path, threads: usize) -> Result<MeshSummary, CliError> {
    let study = &config.mesh_study;
    if study.levels.len() < 3 {
        return Err(CliError::config("mesh_study.levels", "at least three levels are required"));
    }
    if study.levels.windows(2).any(|w| w[1] != 2 * w[0]) || study.levels[0] == 0 {
        return Err(CliError::config("mesh_study.levels", "each level must double the previous one"));
    }
    if study.dt_divisors.len() < 2 {
        return Err(CliError::config("mesh_study.dt_divisors", "at least two divisors are required"));
    }
    create_dir(out)?;
    let t_final = study.t_final.unwrap_or(config.t_final);
    if t_final <= 0.0 {
        return Err(CliError::config("mesh_study.t_final", "the study needs a positive horizon"));
    }
    let run_to = finish(config, t_final);
    let alpha = config.system()?.alpha().to_vec();

    // Space: one time step on every level, so the time error largely cancels
    // between neighbouring levels and constant data gives identical levels.
    let level_configs: Vec<ExperimentConfig> = study.levels.iter().map(|&cells| config.with_cells(cells)).collect();
    let level_runs = map_runs(threads, &level_configs, &run_to)?;
    let mut all_held = level_runs.iter().all(Option::is_some);
    let mut space = Vec::new();
    if all_held {
        let finals: Vec<&FieldSet> = level_runs.iter().flatten().map(|o| &o.final_state.fields).collect();
        let entropies: Vec<f64> = finals.iter().map(|f| entropy(f, &alpha)).collect();
        let mut self_diff = Vec::new();
        for k in 0..finals.len() - 1 {
            let fine = finals[k + 1]
                .coarsened(2)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            self_diff.push(sup_difference(finals[k], &fine));
        }
        let analytic: Vec<Option<f64>> = finals
            .iter()
            .map(|f| analytic_solution(config, *f.grid(), t_final).map(|exact| sup_difference(f, &exact)))
            .collect();
        let entropy_diffs: Vec<f64> = entropies.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for (k, c) in level_configs.iter().enumerate() {
            let grid = c.grid()?;
            let prev = |v: &[f64]| (k >= 1 && k - 1 < v.len()).then(|| v[k - 1]);
            let here = |v: &[f64]| (k < v.len()).then(|| v[k]);
            space.push(SpaceRow {
                cells: c.grid.cells[0],
                h: grid.max_spacing(),
                dt: c.stepper.dt,
                self_difference: here(&self_diff),
                self_order: prev(&self_diff).zip(here(&self_diff)).and_then(|(a, b)| order(a, b, 2.0)),
                analytic_error: analytic[k],
                analytic_order: (k >= 1)
                    .then(|| analytic[k - 1].zip(analytic[k]))
                    .flatten()
                    .and_then(|(a, b)| order(a, b, 2.0)),
                entropy: entropies[k],
                entropy_difference: here(&entropy_diffs),
                entropy_order: prev(&entropy_diffs).zip(here(&entropy_diffs)).and_then(|(a, b)| order(a, b, 2.0)),
            });
        }
    }

    // Time: each splitting against its own fine-step reference.
    let base_dt = study.time_dt.unwrap_or(config.stepper.dt);
    let mut jobs = Vec::new();
    for splitting in [Splitting::Lie, Splitting::Strang] {
        for &div in study.dt_divisors.iter().chain(std::iter::once(&study.reference_divisor)) {
            let mut c = config.clone();
            c.stepper = splitting_config(&config.stepper, splitting, base_dt / div as f64);
            jobs.push((splitting, div, c));
        }
    }
    let time_configs: Vec<ExperimentConfig> = jobs.iter().map(|(_, _, c)| c.clone()).collect();
    let time_runs = map_runs(threads, &time_configs, &run_to)?;
    all_held &= time_runs.iter().all(Option::is_some);
    let mut time = Vec::new();
    if all_held {
        let per = study.dt_divisors.len() + 1;
        for (block, runs) in time_runs.chunks(per).enumerate() {
            let reference = &runs[per - 1].as_ref().expect("checked").final_state.fields;
            let mut previous: Option<(usize, f64)> = None;
            for (k, r) in runs[..per - 1].iter().enumerate() {
                let (splitting, div, _) = &jobs[block * per + k];
                let error = sup_difference(&r.as_ref().expect("checked").final_state.fields, reference);
                let (ratio, ord) = match previous {
                    Some((pd, pe)) => (Some(pe / error), order(pe, error, *div as f64 / pd as f64)),
                    None => (None, None),
                };
                time.push(TimeRow {
                    splitting: *splitting,
                    divisor: *div,
                    dt: base_dt / *div as f64,
                    error,
                    ratio,
                    order: ord,
                });
                previous = Some((*div, error));
            }
        }
    }

    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.12e}"));
    let mut w = csv_writer(&out.join("mesh_space.csv"))?;
    w.write_record([
        "cells",
        "h",
        "dt",
        "self_difference",
        "self_order",
        "analytic_error",
        "analytic_order",
        "entropy",
        "entropy_difference",
        "entropy_order",
    ])?;
    for r in &space {
        w.write_record([
            r.cells.to_string(),
            format!("{:.12e}", r.h),
            format!("{:.12e}", r.dt),
            fmt(r.self_difference),
            fmt(r.self_order),
            fmt(r.analytic_error),
            fmt(r.analytic_order),
            format!("{:.12e}", r.entropy),
            fmt(r.entropy_difference),
            fmt(r.entropy_order),
        ])?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: out.join("mesh_space.csv"),
        source,
    })?;
    let mut w = csv_writer(&out.join("mesh_time.csv"))?;
    w.write_record(["splitting", "divisor", "dt", "error", "ratio", "order"])?;
    for r in &time {
        w.write_record([
            format!("{:?}", r.splitting).to_lowercase(),
            r.divisor.to_string(),
            format!("{:.12e}", r.dt),
            format!("{:.12e}", r.error),
            fmt(r.ratio),
            fmt(r.order),
        ])?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: out.join("mesh_time.csv"),
        source,
    })?;
    let summary = MeshSummary {
        schema_version: SCHEMA_VERSION,
        name: config.name.clone(),
        t_final,
        space,
        time,
        all_invariants_held: all_held,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
