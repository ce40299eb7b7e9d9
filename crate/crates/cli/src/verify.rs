//! `verify-chains`, `picard-demo` and `kernel-check`.

use std::path::Path;
use std::time::Instant;

use degenrd_core::bootstrap::{
    gn_identity_check, kernel_time_integrable, linf_threshold, ode_power_map, rational, replay_all, Exponent,
    ExponentChain, ThresholdKind,
};
use degenrd_core::kernel::{
    gaussian_fit_stability, mass_check, point_source_discrepancy, semigroup_check, small_time_window,
    smoothing_probe, FitStability, KernelSpec, MassReport, SmoothingProbe, SmoothingReport, SourceKind,
};
use degenrd_core::picard::{
    convergence_envelope_check, picard_iterate, sup_distance, CanonicalScenario, EnvelopeReport, OdeOptions,
    PicardBoundConstants,
};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, EXIT_BREACH, EXIT_OK};
use crate::run::{create_dir, csv_writer, write_json, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub computed: String,
    pub expected: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainsReport {
    pub schema_version: u32,
    pub chains: Vec<ExponentChain>,
    pub identities: Vec<IdentityCheck>,
    pub all_pass: bool,
    pub elapsed_seconds: f64,
}

impl ChainsReport {
    pub fn exit_code(&self) -> i32 {
        if self.all_pass {
            EXIT_OK
        } else {
            EXIT_BREACH
        }
    }
}

fn identity(name: &str, computed: String, expected: String, pass: bool) -> IdentityCheck {
    IdentityCheck {
        name: name.to_string(),
        computed,
        expected,
        pass,
    }
}

/// Landmark rational identities recomputed through the public checks.
pub fn landmark_identities() -> Result<Vec<IdentityCheck>, CliError> {
    let internal = |e: degenrd_core::bootstrap::BootstrapError| CliError::Internal(e.to_string());
    let mut out = Vec::new();

    let gn = gn_identity_check(3, &Exponent::ratio(39, 10), &Exponent::ratio(234, 81), &rational(1, 2)).map_err(internal)?;
    let split = rational(1, 12) + rational(81, 468);
    out.push(identity(
        "interpolation 10/39 = 1/12 + 81/468",
        format!("{} = {}", gn.lhs, gn.rhs),
        format!("{} = {}", rational(10, 39), split),
        gn.pass && gn.lhs == rational(10, 39) && gn.rhs == split,
    ));

    let k4 = kernel_time_integrable(4, &Exponent::integer(2), &Exponent::integer(6)).map_err(internal)?;
    out.push(identity(
        "kernel exponent (4/2)(1/2 - 1/6) < 1",
        k4.exponent.to_string(),
        rational(2, 3).to_string(),
        k4.pass && k4.exponent == rational(2, 3),
    ));

    let k5 = kernel_time_integrable(5, &Exponent::ratio(5, 3), &Exponent::ratio(50, 11)).map_err(internal)?;
    out.push(identity(
        "kernel exponent (5/2)(3/5 - 11/50) < 1",
        k5.exponent.to_string(),
        rational(19, 20).to_string(),
        k5.pass && k5.exponent == rational(19, 20),
    ));

    let mapped = ode_power_map(&Exponent::ratio(58, 11), &rational(10, 3)).map_err(internal)?;
    let threshold = Exponent::Finite(linf_threshold(3, ThresholdKind::Space));
    out.push(identity(
        "power map 58/11 -> 87/55 above 3/2",
        format!("{mapped} > {threshold}"),
        format!("{} > {}", Exponent::ratio(87, 55), Exponent::ratio(3, 2)),
        mapped == Exponent::ratio(87, 55) && mapped > threshold,
    ));
    Ok(out)
}

pub fn verify_chains(out: &Path) -> Result<ChainsReport, CliError> {
    create_dir(out)?;
    let start = Instant::now();
    let chains = replay_all();
    let identities = landmark_identities()?;
    let all_pass = chains
        .iter()
        .all(|c| c.reached_linf() && c.is_well_formed() && c.steps.iter().all(|s| s.pass))
        && identities.iter().all(|i| i.pass);
    let report = ChainsReport {
        schema_version: SCHEMA_VERSION,
        chains,
        identities,
        all_pass,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&out.join("chains.json"), &report)?;
    Ok(report)
}

/// Iterations reported by `picard-demo`.
pub const PICARD_ITERATIONS: usize = 25;
/// The limit is taken as the iterate this far out.
const PICARD_LIMIT_ITERATIONS: usize = 60;
pub const ORACLE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardSummary {
    pub schema_version: u32,
    pub scenario: CanonicalScenario,
    pub constants: PicardBoundConstants,
    pub contraction: f64,
    pub envelope: EnvelopeReport,
    /// Sup distance of the last reported iterate to the adaptive ODE solution.
    pub oracle_distance: f64,
    pub oracle_tolerance: f64,
    pub pass: bool,
}

impl PicardSummary {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_OK
        } else {
            EXIT_BREACH
        }
    }
}

pub fn picard_demo(out: &Path) -> Result<PicardSummary, CliError> {
    create_dir(out)?;
    let internal = |e: degenrd_core::picard::PicardError| CliError::Internal(e.to_string());
    let scenario = CanonicalScenario::default();
    let inputs = scenario.inputs();
    let iterates = picard_iterate(&inputs, PICARD_LIMIT_ITERATIONS).map_err(internal)?;
    let constants = PicardBoundConstants::from_inputs(&inputs).map_err(internal)?;
    let limit = &iterates[PICARD_LIMIT_ITERATIONS];
    let envelope = convergence_envelope_check(&iterates[..=PICARD_ITERATIONS], &constants, limit).map_err(internal)?;
    let oracle = scenario.oracle(&OdeOptions::default()).map_err(internal)?;
    let oracle_distance = sup_distance(&iterates[PICARD_ITERATIONS], &oracle);

    let mut w = csv_writer(&out.join("picard.csv"))?;
    w.write_record(["p", "sup_error", "envelope", "pass"])?;
    for r in &envelope.rows {
        w.write_record([
            r.p.to_string(),
            format!("{:.12e}", r.error),
            format!("{:.12e}", r.envelope),
            r.pass.to_string(),
        ])?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: out.join("picard.csv"),
        source,
    })?;
    let summary = PicardSummary {
        schema_version: SCHEMA_VERSION,
        scenario,
        contraction: constants.c5 * constants.horizon,
        pass: envelope.holds && oracle_distance <= ORACLE_TOLERANCE,
        constants,
        envelope,
        oracle_distance,
        oracle_tolerance: ORACLE_TOLERANCE,
    };
    write_json(&out.join("picard_summary.json"), &summary)?;
    Ok(summary)
}

/// Tolerances of `kernel-check`.
pub const MASS_TOLERANCE: f64 = 1e-8;
pub const SEMIGROUP_TOLERANCE: f64 = 1e-6;
pub const FIT_TOLERANCE: f64 = 0.2;
pub const SMOOTHING_TOLERANCE: f64 = 0.2;
/// Cosine modes of the checked kernel.
pub const KERNEL_MODES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSourceRow {
    pub cells: usize,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSummary {
    pub schema_version: u32,
    pub spec: KernelSpec,
    pub mass: MassReport,
    pub semigroup_error: f64,
    pub fit: FitStability,
    pub point_source: Vec<PointSourceRow>,
    pub smoothing: Vec<SmoothingReport>,
    pub pass: bool,
}

impl KernelSummary {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_OK
        } else {
            EXIT_BREACH
        }
    }
}

/// Kernel on the configured domain with the largest diffusion coefficient,
/// or the unit interval with unit diffusion.
pub fn kernel_spec(config: Option<&ExperimentConfig>) -> Result<KernelSpec, CliError> {
    let (diffusion, lengths) = match config {
        Some(c) => (
            c.system.diffusion.iter().copied().fold(0.0, f64::max),
            c.grid.lengths.clone(),
        ),
        None => (1.0, vec![1.0]),
    };
    let spec = KernelSpec {
        diffusion,
        lengths,
        modes: KERNEL_MODES,
    };
    spec.validate().map_err(|e| CliError::config("system.diffusion", e.to_string()))?;
    Ok(spec)
}

pub fn kernel_check(config: Option<&ExperimentConfig>, out: &Path) -> Result<KernelSummary, CliError> {
    create_dir(out)?;
    let internal = |e: degenrd_core::kernel::KernelError| CliError::Internal(e.to_string());
    let spec = kernel_spec(config)?;
    let seed = config.map_or(0, |c| c.seed);
    let scale = spec.lengths.iter().copied().fold(0.0, f64::max).powi(2) / spec.diffusion;
    let one_d = spec.dimension() == 1;
    // The kernel is a product over axes, so mass, composition and the point
    // source are checked on the first axis.
    let axis = KernelSpec::interval(spec.diffusion, spec.lengths[0], spec.modes).map_err(internal)?;
    let mut times = small_time_window(&axis, 1e-4, 1e-1, 7);
    times.extend([0.5 * scale, scale]);
    let mass = mass_check(&axis, &times, 201).map_err(internal)?;
    let semigroup_error = semigroup_check(&axis, 0.01 * scale, 0.02 * scale, 101).map_err(internal)?;
    let per_axis = if one_d { 41 } else { 9 };
    let fit = gaussian_fit_stability(&spec, spec.default_kappa(), (1e-4, 1e-1), 9, per_axis, FIT_TOLERANCE)
        .map_err(internal)?;
    let point_source = [32, 64, 128]
        .into_iter()
        .map(|cells| {
            point_source_discrepancy(&axis, cells, 0.05 * scale, cells / 4)
                .map(|discrepancy| PointSourceRow { cells, discrepancy })
                .map_err(internal)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let probe = |p: f64, s: f64| SmoothingProbe {
        p,
        s,
        horizon: 0.5 * scale,
        cells: if one_d { 32 } else { 12 },
        dt: 0.01 * scale,
        trials: 4,
        seed,
        source: SourceKind::RandomCosine { modes: 3 },
    };
    let smoothing = [probe(1.0, 2.0), probe(2.0, 8.0)]
        .iter()
        .map(|pr| smoothing_probe(&spec, pr, SMOOTHING_TOLERANCE).map_err(internal))
        .collect::<Result<Vec<_>, _>>()?;

    let mut w = csv_writer(&out.join("kernel_fit.csv"))?;
    w.write_record(["sample_set", "kappa", "c_h", "argmax_t", "samples", "min_kernel"])?;
    for (label, f) in [("coarse", &fit.coarse), ("fine", &fit.fine)] {
        w.write_record([
            label.to_string(),
            format!("{:.12e}", f.kappa),
            format!("{:.12e}", f.c_h),
            format!("{:.12e}", f.argmax.0),
            f.samples.to_string(),
            format!("{:.12e}", f.min_kernel),
        ])?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: out.join("kernel_fit.csv"),
        source,
    })?;
    let mut w = csv_writer(&out.join("kernel_smoothing.csv"))?;
    w.write_record(["p", "s", "threshold", "trial", "coarse_ratio", "fine_ratio", "relative_change"])?;
    for r in &smoothing {
        for t in &r.trials {
            w.write_record([
                r.p.to_string(),
                r.s.to_string(),
                r.threshold.to_string(),
                t.trial.to_string(),
                format!("{:.12e}", t.coarse_ratio),
                format!("{:.12e}", t.fine_ratio),
                format!("{:.12e}", t.relative_change),
            ])?;
        }
    }
    w.flush().map_err(|source| CliError::Io {
        path: out.join("kernel_smoothing.csv"),
        source,
    })?;

    let pass = mass.max_mass_error <= MASS_TOLERANCE
        && mass.min_value >= -MASS_TOLERANCE
        && semigroup_error <= SEMIGROUP_TOLERANCE
        && fit.pass
        && smoothing.iter().all(|s| s.below_threshold && s.stable);
    let summary = KernelSummary {
        schema_version: SCHEMA_VERSION,
        spec,
        mass,
        semigroup_error,
        fit,
        point_source,
        smoothing,
        pass,
    };
    write_json(&out.join("kernel_summary.json"), &summary)?;
    Ok(summary)
}
