//! Operator-split time stepping: implicit diffusion of the diffusing species
//! and a cell-local reaction solve, with invariant monitoring in `run`.

mod diffusion;
mod reaction;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diffusion::{cosine_exponential_matrix, thomas_solve, DiffusionScheme};
pub use reaction::{equilibrium_product, reaction_cell_solve, CellSolveOptions, CellSolveStats, ReactionSolver};

use crate::diagnostics::{entropy, species_gradient_dissipation, DiagnosticsRecord, Monitor};
use crate::grid::{integrate, FieldSet, Grid};
use crate::kinetics::RegularizedRates;
use crate::model::{classify, DegeneracyClassification};

pub(crate) use diffusion::DiffusionOperator;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("invalid stepper configuration: {0}")]
    Config(String),
    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    LinearSolve { residual: f64, tolerance: f64 },
    #[error("step failed after {halvings} halvings of dt: {last}")]
    Rejected { halvings: u32, last: Box<StepError> },
    #[error("state does not match the system: {0}")]
    Shape(String),
    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// Diffusion, then reaction.
    #[default]
    Lie,
    /// Half diffusion, reaction, half diffusion.
    Strang,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct StepperConfig {
    pub dt: f64,
    pub splitting: Splitting,
    pub reaction_solver: ReactionSolver,
    pub diffusion_scheme: DiffusionScheme,
    /// The run uses the largest step `<= dt * dt_safety` that lands on the
    /// final time.
    pub dt_safety: f64,
    pub entropy_tolerance_factor: f64,
    pub reactions_enabled: bool,
    pub positivity_tolerance: f64,
    pub mass_tolerance: f64,
    pub pair_tolerance: f64,
    pub pointwise_sum_tolerance: f64,
    pub linear_tolerance: f64,
    pub max_halvings: u32,
    pub newton_max_iterations: usize,
    pub newton_tolerance: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            splitting: Splitting::Lie,
            reaction_solver: ReactionSolver::CellNewton,
            diffusion_scheme: DiffusionScheme::BackwardEuler,
            dt_safety: 1.0,
            entropy_tolerance_factor: 10.0,
            reactions_enabled: true,
            positivity_tolerance: 1e-12,
            mass_tolerance: 1e-8,
            pair_tolerance: 1e-10,
            pointwise_sum_tolerance: 1e-12,
            linear_tolerance: 1e-13,
            max_halvings: 8,
            newton_max_iterations: 50,
            newton_tolerance: 1e-15,
        }
    }
}

impl StepperConfig {
    /// First-order Lie splitting with backward Euler substeps.
    pub fn lie(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    /// Second-order Strang splitting: exact diffusion and extrapolated
    /// reaction substeps.
    pub fn strang(dt: f64) -> Self {
        Self {
            dt,
            splitting: Splitting::Strang,
            reaction_solver: ReactionSolver::CellNewtonRichardson,
            diffusion_scheme: DiffusionScheme::Exponential,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        let bad = |msg: String| Err(StepError::Config(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return bad(format!("dt_safety must lie in (0, 1], got {}", self.dt_safety));
        }
        for (name, v) in [
            ("entropy_tolerance_factor", self.entropy_tolerance_factor),
            ("positivity_tolerance", self.positivity_tolerance),
            ("mass_tolerance", self.mass_tolerance),
            ("pair_tolerance", self.pair_tolerance),
            ("pointwise_sum_tolerance", self.pointwise_sum_tolerance),
            ("linear_tolerance", self.linear_tolerance),
            ("newton_tolerance", self.newton_tolerance),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if self.newton_max_iterations == 0 {
            return bad("newton_max_iterations must be positive".into());
        }
        Ok(())
    }

    fn cell_options(&self) -> CellSolveOptions {
        CellSolveOptions {
            max_iterations: self.newton_max_iterations,
            tolerance: self.newton_tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ClampLog {
    pub events: u64,
    /// Most negative value that was clamped to zero.
    pub most_negative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub time: f64,
    pub fields: FieldSet,
    pub step_count: u64,
    pub clamps: ClampLog,
}

impl SimulationState {
    pub fn new(fields: FieldSet) -> Self {
        Self {
            time: 0.0,
            fields,
            step_count: 0,
            clamps: ClampLog::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepReport {
    pub dt: f64,
    /// Number of substeps the step was split into after rejections.
    pub substeps: u32,
    /// Dissipation accumulated over the step, each split part evaluated at
    /// the state it produced.
    pub dissipation_increment: f64,
    pub newton_fallbacks: u64,
    pub clamps: u64,
    /// Smallest entry seen before clamping.
    pub min_before_clamp: f64,
}

/// Split stepper bound to one system, regularization and grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    rates: RegularizedRates,
    classification: DegeneracyClassification,
    grid: Grid,
    config: StepperConfig,
    operators: HashMap<(usize, u64), DiffusionOperator>,
}

impl Stepper {
    pub fn new(rates: RegularizedRates, grid: Grid, config: StepperConfig) -> Result<Self, StepError> {
        config.validate()?;
        Ok(Self {
            classification: classify(rates.system()),
            rates,
            grid,
            config,
            operators: HashMap::new(),
        })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    pub fn rates(&self) -> &RegularizedRates {
        &self.rates
    }

    pub fn classification(&self) -> &DegeneracyClassification {
        &self.classification
    }

    fn check_shape(&self, fields: &FieldSet) -> Result<(), StepError> {
        if fields.species() != self.rates.system().species() {
            return Err(StepError::Shape(format!(
                "{} fields for {} species",
                fields.species(),
                self.rates.system().species()
            )));
        }
        if *fields.grid() != self.grid {
            return Err(StepError::Shape("fields live on a different grid".into()));
        }
        Ok(())
    }

    /// Diffuses every diffusing species over `dt`; returns the gradient
    /// dissipation of the result times `dt`.
    pub fn diffusion_substep(&mut self, fields: &mut FieldSet, dt: f64) -> Result<f64, StepError> {
        self.check_shape(fields)?;
        let system = self.rates.system().clone();
        let mut increment = 0.0;
        for &i in &self.classification.lambda2 {
            let d = system.diffusion()[i];
            let key = (i, dt.to_bits());
            let (grid, scheme) = (self.grid, self.config.diffusion_scheme);
            let op = self
                .operators
                .entry(key)
                .or_insert_with(|| DiffusionOperator::new(grid, d * dt, scheme));
            let updated = op.apply(fields.field(i), self.config.linear_tolerance)?;
            *fields.field_mut(i) = updated;
            increment += dt * species_gradient_dissipation(fields.field(i), system.alpha()[i], d);
        }
        Ok(increment)
    }

    /// Cell-by-cell reaction solve over `dt`; returns the reaction
    /// dissipation of the result times `dt` and the bisection count.
    pub fn reaction_substep(&self, fields: &mut FieldSet, dt: f64) -> Result<(f64, u64), StepError> {
        self.check_shape(fields)?;
        let m = fields.species();
        let options = self.config.cell_options();
        let mut state = vec![0.0; m];
        let mut dissipation = 0.0;
        let mut fallbacks = 0;
        for cell in 0..self.grid.cell_count() {
            fields.cell_state(cell, &mut state);
            let stats = reaction_cell_solve(&mut state, &self.rates, dt, self.config.reaction_solver, &options);
            fallbacks += u64::from(stats.bisection_fallback);
            dissipation += stats.dissipation;
            fields.set_cell_state(cell, &state);
        }
        Ok((dt * dissipation * self.grid.cell_measure(), fallbacks))
    }

    fn split_step(&mut self, fields: &mut FieldSet, dt: f64, report: &mut StepReport) -> Result<(), StepError> {
        let reactions = self.config.reactions_enabled;
        let react = |this: &mut Self, fields: &mut FieldSet, report: &mut StepReport| -> Result<(), StepError> {
            if reactions {
                let (d, fallbacks) = this.reaction_substep(fields, dt)?;
                report.dissipation_increment += d;
                report.newton_fallbacks += fallbacks;
            }
            Ok(())
        };
        match self.config.splitting {
            Splitting::Lie => {
                report.dissipation_increment += self.diffusion_substep(fields, dt)?;
                clamp_negative(fields, self.config.positivity_tolerance, report);
                react(self, fields, report)?;
            }
            Splitting::Strang => {
                report.dissipation_increment += self.diffusion_substep(fields, 0.5 * dt)?;
                clamp_negative(fields, self.config.positivity_tolerance, report);
                react(self, fields, report)?;
                report.dissipation_increment += self.diffusion_substep(fields, 0.5 * dt)?;
            }
        }
        clamp_negative(fields, self.config.positivity_tolerance, report);
        Ok(())
    }

    /// Advances `state` by `dt`. A failed linear solve is retried with the
    /// step split into 2, 4, ... substeps, up to `max_halvings` times.
    pub fn step_by(&mut self, state: &mut SimulationState, dt: f64) -> Result<StepReport, StepError> {
        self.check_shape(&state.fields)?;
        let mut last_error = None;
        for halvings in 0..=self.config.max_halvings {
            let substeps = 1u32 << halvings;
            let h = dt / f64::from(substeps);
            let mut fields = state.fields.clone();
            let mut report = StepReport {
                dt,
                substeps,
                min_before_clamp: f64::INFINITY,
                ..StepReport::default()
            };
            let outcome = (0..substeps).try_for_each(|_| self.split_step(&mut fields, h, &mut report));
            match outcome {
                Ok(()) => {
                    state.fields = fields;
                    state.time += dt;
                    state.step_count += 1;
                    state.clamps.events += report.clamps;
                    if report.clamps > 0 {
                        state.clamps.most_negative = state.clamps.most_negative.min(report.min_before_clamp);
                    }
                    return Ok(report);
                }
                Err(e @ StepError::LinearSolve { .. }) => {
                    log::warn!("step at t = {} rejected with {substeps} substeps: {e}", state.time);
                    last_error = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(StepError::Rejected {
            halvings: self.config.max_halvings,
            last: Box::new(last_error.expect("at least one attempt")),
        })
    }

    pub fn step(&mut self, state: &mut SimulationState) -> Result<StepReport, StepError> {
        let dt = self.config.dt;
        self.step_by(state, dt)
    }
}

/// Sets entries in `[-tolerance, 0)` to zero and logs them; entries below
/// `-tolerance` are left for the caller to report.
fn clamp_negative(fields: &mut FieldSet, tolerance: f64, report: &mut StepReport) {
    for s in 0..fields.species() {
        for v in fields.field_mut(s).values_mut() {
            if *v < 0.0 {
                report.min_before_clamp = report.min_before_clamp.min(*v);
                if *v >= -tolerance {
                    report.clamps += 1;
                    log::debug!("clamped {v:e} to zero");
                    *v = 0.0;
                }
            } else if *v < report.min_before_clamp {
                report.min_before_clamp = *v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BreachKind {
    Positivity,
    PairMass,
    DegeneratePair,
    PointwiseSum,
    Entropy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreachReport {
    pub kind: BreachKind,
    pub time: f64,
    pub step: u64,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("invariant breach ({:?}) at t = {} (step {}): {} ; value {:e} vs tolerance {:e}",
        .0.kind, .0.time, .0.step, .0.detail, .0.value, .0.tolerance)]
    Breach(Box<BreachReport>),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("invalid run options: {0}")]
    Options(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub t_final: f64,
    /// Record diagnostics every this many steps (and at the final step).
    pub record_every: usize,
    /// Finite Lebesgue exponents tracked by the diagnostics.
    pub lp_exponents: Vec<f64>,
    /// Keep the full state of this cell after every step.
    pub trace_cell: Option<usize>,
    /// Keep a copy of the fields every this many steps.
    pub snapshot_every: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            record_every: 10,
            lp_exponents: vec![4.0],
            trace_cell: None,
            snapshot_every: None,
        }
    }
}

/// Pointwise history of one cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointTrace {
    pub cell: usize,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `1 / phi_n` along the trace.
    pub inverse_phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct InvariantSummary {
    pub min_value: f64,
    pub max_pair_mass_drift: f64,
    pub max_degenerate_pair_drift: f64,
    pub max_pointwise_sum_drift: f64,
    pub max_pointwise_sum_step_change: f64,
    /// Largest per-step entropy increase.
    pub max_entropy_increase: f64,
    pub entropy_allowance: f64,
    pub clamp_events: u64,
    pub newton_fallbacks: u64,
    pub rejected_steps: u64,
    pub l1_warnings: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: SimulationState,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<(f64, FieldSet)>,
    pub trace: Option<PointTrace>,
    pub invariants: InvariantSummary,
    pub steps: u64,
    pub dt: f64,
}

/// Receives every diagnostics record as it is produced.
pub trait Observer {
    fn on_record(&mut self, state: &SimulationState, record: &DiagnosticsRecord);
}

struct InvariantTracker {
    pair_masses: Vec<f64>,
    pointwise_pairs: Vec<usize>,
    product: usize,
}

impl InvariantTracker {
    fn pair_masses(fields: &FieldSet) -> Vec<f64> {
        let m = fields.species();
        let am = integrate(fields.field(m - 1));
        (0..m - 1).map(|i| integrate(fields.field(i)) + am).collect()
    }

    fn max_mass_drift(&self, fields: &FieldSet) -> f64 {
        Self::pair_masses(fields)
            .iter()
            .zip(&self.pair_masses)
            .map(|(now, start)| (now - start).abs() / start.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    fn pointwise_step_change(&self, before: &FieldSet, after: &FieldSet) -> f64 {
        let p = self.product;
        let mut worst: f64 = 0.0;
        for &i in &self.pointwise_pairs {
            let pairs = before.field(i).values().iter().zip(before.field(p).values());
            let next = after.field(i).values().iter().zip(after.field(p).values());
            for ((a0, m0), (a1, m1)) in pairs.zip(next) {
                let scale = (a0 + m0).abs().max(1.0);
                worst = worst.max(((a1 + m1) - (a0 + m0)).abs() / scale);
            }
        }
        worst
    }
}

fn breach(kind: BreachKind, state: &SimulationState, value: f64, tolerance: f64, detail: String) -> RunError {
    RunError::Breach(Box::new(BreachReport {
        kind,
        time: state.time,
        step: state.step_count,
        value,
        tolerance,
        detail,
    }))
}

/// Integrates from `initial` to `options.t_final`, checking the structural
/// invariants after every step and recording diagnostics at the configured
/// cadence.
pub fn run(
    initial: FieldSet,
    rates: RegularizedRates,
    config: StepperConfig,
    options: &RunOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<RunOutput, RunError> {
    if !(options.t_final.is_finite() && options.t_final >= 0.0) {
        return Err(RunError::Options(format!("t_final must be finite and nonnegative, got {}", options.t_final)));
    }
    if options.record_every == 0 {
        return Err(RunError::Options("record_every must be positive".into()));
    }
    if options.lp_exponents.iter().any(|&p| !(p.is_finite() && p >= 1.0)) {
        return Err(RunError::Options("tracked exponents must be finite and at least 1".into()));
    }
    if let Some(cell) = options.trace_cell {
        if cell >= initial.grid().cell_count() {
            return Err(RunError::Options(format!("trace cell {cell} is outside the grid")));
        }
    }
    let (cell_min_species, cell_min, min_value) = initial.min_entry();
    if min_value < 0.0 || !min_value.is_finite() {
        return Err(RunError::Options(format!(
            "initial data must be nonnegative; species {cell_min_species} cell {cell_min} holds {min_value}"
        )));
    }
    let grid = *initial.grid();
    let mut stepper = Stepper::new(rates.clone(), grid, config.clone())?;
    stepper.check_shape(&initial)?;
    let mut state = SimulationState::new(initial.clone());
    let mut output = RunOutput {
        final_state: state.clone(),
        records: Vec::new(),
        snapshots: Vec::new(),
        trace: None,
        invariants: InvariantSummary {
            min_value,
            ..InvariantSummary::default()
        },
        steps: 0,
        dt: 0.0,
    };
    if options.t_final == 0.0 {
        return Ok(output);
    }

    let nominal = config.dt * config.dt_safety;
    let steps = ((options.t_final / nominal) - 1e-9).ceil().max(1.0) as u64;
    let dt = options.t_final / steps as f64;
    output.steps = steps;
    output.dt = dt;

    let system = rates.system().clone();
    let mut monitor = Monitor::new(rates.clone(), &initial, options.lp_exponents.clone());
    let classification = monitor.classification().clone();
    let tracker = InvariantTracker {
        pair_masses: InvariantTracker::pair_masses(&initial),
        pointwise_pairs: if classification.product_degenerate() {
            classification.degenerate_reactants()
        } else {
            Vec::new()
        },
        product: system.product_index(),
    };
    let e0 = monitor.entropy_initial();
    let h = grid.max_spacing();
    let allowance = config.entropy_tolerance_factor * (dt * dt + h * h) * e0.abs() + 1e-12;
    output.invariants.entropy_allowance = allowance;

    let mut trace = options.trace_cell.map(|cell| PointTrace {
        cell,
        ..PointTrace::default()
    });
    let push_trace = |trace: &mut Option<PointTrace>, state: &SimulationState| {
        if let Some(t) = trace.as_mut() {
            let mut s = vec![0.0; state.fields.species()];
            state.fields.cell_state(t.cell, &mut s);
            t.times.push(state.time);
            t.inverse_phi.push(1.0 / rates.phi_n(&s));
            t.states.push(s);
        }
    };
    push_trace(&mut trace, &state);

    let mut dissipation_integral = 0.0;
    let emit = |state: &SimulationState, monitor: &Monitor, dint: f64, out: &mut RunOutput, observers: &mut [&mut dyn Observer]| {
        let record = monitor.record(state.time, state.step_count, &state.fields, dint);
        if record.l1_warning {
            out.invariants.l1_warnings += 1;
            log::warn!("L1 total {} exceeds the a priori bound {} at t = {}", record.l1_total, record.m2_bound, record.time);
        }
        for o in observers.iter_mut() {
            o.on_record(state, &record);
        }
        out.records.push(record);
    };
    emit(&state, &monitor, 0.0, &mut output, observers);
    if options.snapshot_every.is_some() {
        output.snapshots.push((0.0, state.fields.clone()));
    }

    let mut entropy_prev = e0;
    for k in 1..=steps {
        let before = state.fields.clone();
        let report = stepper.step_by(&mut state, dt)?;
        if k == steps {
            state.time = options.t_final;
        }
        dissipation_integral += report.dissipation_increment;
        output.invariants.clamp_events += report.clamps;
        output.invariants.newton_fallbacks += report.newton_fallbacks;
        output.invariants.rejected_steps += u64::from(report.substeps > 1);
        output.invariants.min_value = output.invariants.min_value.min(report.min_before_clamp);

        if report.min_before_clamp < -config.positivity_tolerance {
            let (s, c, v) = state.fields.min_entry();
            return Err(breach(
                BreachKind::Positivity,
                &state,
                v,
                -config.positivity_tolerance,
                format!("species {} cell {c} went negative", s + 1),
            ));
        }
        let mass_drift = tracker.max_mass_drift(&state.fields);
        output.invariants.max_pair_mass_drift = output.invariants.max_pair_mass_drift.max(mass_drift);
        if mass_drift > config.mass_tolerance {
            return Err(breach(BreachKind::PairMass, &state, mass_drift, config.mass_tolerance, "relative drift of a reactant-product mass".into()));
        }
        let residuals = monitor.record_residuals(&state.fields);
        output.invariants.max_degenerate_pair_drift = output.invariants.max_degenerate_pair_drift.max(residuals.0);
        if residuals.0 > config.pair_tolerance {
            return Err(breach(BreachKind::DegeneratePair, &state, residuals.0, config.pair_tolerance, "difference of two non-diffusing reactants moved".into()));
        }
        output.invariants.max_pointwise_sum_drift = output.invariants.max_pointwise_sum_drift.max(residuals.1);
        let sum_change = tracker.pointwise_step_change(&before, &state.fields);
        output.invariants.max_pointwise_sum_step_change = output.invariants.max_pointwise_sum_step_change.max(sum_change);
        if sum_change > config.pointwise_sum_tolerance {
            return Err(breach(BreachKind::PointwiseSum, &state, sum_change, config.pointwise_sum_tolerance, "reactant-product sum changed in a cell".into()));
        }
        let e = entropy(&state.fields, system.alpha());
        let increase = e - entropy_prev;
        output.invariants.max_entropy_increase = output.invariants.max_entropy_increase.max(increase);
        if k == 1 {
            output.invariants.max_entropy_increase = increase;
        }
        if increase > allowance {
            return Err(breach(BreachKind::Entropy, &state, increase, allowance, "entropy increased".into()));
        }
        entropy_prev = e;

        monitor.accumulate(dt, &state.fields);
        push_trace(&mut trace, &state);
        if k % options.record_every as u64 == 0 || k == steps {
            emit(&state, &monitor, dissipation_integral, &mut output, observers);
        }
        if let Some(every) = options.snapshot_every {
            if k % every.max(1) as u64 == 0 || k == steps {
                output.snapshots.push((state.time, state.fields.clone()));
            }
        }
    }
    output.final_state = state;
    output.trace = trace;
    Ok(output)
}
