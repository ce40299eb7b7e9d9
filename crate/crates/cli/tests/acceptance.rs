//! Acceptance criteria, one PASS/FAIL line each. Runs every shipped preset
//! to its full horizon, so it takes about a minute with optimizations.

use std::path::Path;
use std::time::{Duration, Instant};

use degenrd_cli::config::{ExperimentConfig, InitialSpec};
use degenrd_cli::mesh::study_mesh;
use degenrd_cli::presets::{preset, PRESET_NAMES};
use degenrd_cli::run::{execute_run, run_options, study_n, RunStatus};
use degenrd_cli::verify::{kernel_check, picard_demo, verify_chains};
use degenrd_core::diagnostics::max_entropy_increase;
use degenrd_core::kinetics::RegIndex;
use degenrd_core::model::{classify, DegeneracyClass};
use degenrd_core::stepper::Splitting;

const CHAIN_RUNTIME: Duration = Duration::from_secs(1);
const PRESET_RUNTIME: Duration = Duration::from_secs(60);
const MIN_CONCENTRATION: f64 = -1e-12;
const PAIR_MASS_DRIFT: f64 = 1e-8;
const POINTWISE_SUM_DRIFT: f64 = 1e-12;
const DEGENERATE_PAIR_DRIFT: f64 = 1e-10;
const ENTROPY_FACTOR: f64 = 10.0;
const DISSIPATION_FLOOR: f64 = -1e-12;
const EQUILIBRIUM_RESIDUAL: f64 = 1e-6;
const PICARD_MAX_P: usize = 25;
const PICARD_CONTRACTION: f64 = 2.0;
const PICARD_ORACLE: f64 = 1e-6;
const LIMIT_GAP: f64 = 1e-3;
const KERNEL_MASS: f64 = 1e-8;
const KERNEL_MODES: usize = 200;
const KERNEL_SEMIGROUP: f64 = 1e-6;
const KERNEL_FIT_CHANGE: f64 = 0.2;
const SMOOTHING_CHANGE: f64 = 0.2;
const SPACE_ORDER: f64 = 2.0;
const SPACE_ORDER_TOL: f64 = 0.2;
const LIE_MIN_ORDER: f64 = 1.0;
const STRANG_RATIO: f64 = 4.0;
const STRANG_RATIO_TOL: f64 = 0.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Root of `prod (sigma_j - x)^{alpha_j} = x` on `[0, min sigma]` by plain
/// bisection on the sign of the difference.
fn bisection_root(sigma: &[f64], alpha: &[f64]) -> f64 {
    let f = |x: f64| sigma.iter().zip(alpha).map(|(s, a)| (s - x).powf(*a)).product::<f64>() - x;
    let (mut lo, mut hi) = (0.0, sigma.iter().copied().fold(f64::INFINITY, f64::min));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_chains(out: &Path) -> Outcome {
    let start = Instant::now();
    let report = verify_chains(&out.join("chains")).expect("chains replay");
    let elapsed = start.elapsed();
    let expected = ["A3-lowdim", "quad-N3", "quad-N4", "quad-N5", "G103-N3"];
    let scenarios_pass = expected.iter().all(|name| {
        report
            .chains
            .iter()
            .any(|c| c.scenario == *name && c.reached_linf() && c.is_well_formed() && c.steps.iter().all(|s| s.pass))
    });
    let identities_pass = report.identities.len() == 4 && report.identities.iter().all(|i| i.pass);
    outcome(
        scenarios_pass && identities_pass && report.all_pass && elapsed < CHAIN_RUNTIME,
        format!(
            "{} chains, identities {}, {:.3} s",
            report.chains.len(),
            if identities_pass { "exact" } else { "FAILED" },
            elapsed.as_secs_f64()
        ),
    )
}

struct PresetCheck {
    invariants: Outcome,
    entropy: Outcome,
}

fn check_preset(name: &str, out: &Path) -> PresetCheck {
    let config = preset(name).expect("preset");
    let system = config.system().unwrap();
    let class = classify(&system).class;
    let grid = config.grid().unwrap();
    let h = grid.max_spacing();
    let options = run_options(&config, config.t_final, false);
    let start = Instant::now();
    let mut inv_fail = Vec::new();
    let mut ent_fail = Vec::new();
    let mut worst_drift: f64 = 0.0;
    let mut worst_min = f64::INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    for &n in &config.n_values {
        let result = execute_run(&config, n, &options, Some(out)).expect("run");
        let s = &result.summary;
        if s.status != RunStatus::Ok {
            inv_fail.push(format!("n={n}: {:?}", s.breach.as_ref().map(|b| b.kind)));
            ent_fail.push(format!("n={n}: no run"));
            continue;
        }
        let inv = &s.invariants;
        worst_drift = worst_drift.max(inv.max_pair_mass_drift);
        worst_min = worst_min.min(inv.min_value);
        if inv.min_value < MIN_CONCENTRATION {
            inv_fail.push(format!("n={n}: min {:e}", inv.min_value));
        }
        if inv.max_pair_mass_drift > PAIR_MASS_DRIFT {
            inv_fail.push(format!("n={n}: pair mass drift {:e}", inv.max_pair_mass_drift));
        }
        if class == DegeneracyClass::A2 && inv.max_pointwise_sum_drift > POINTWISE_SUM_DRIFT {
            inv_fail.push(format!("n={n}: pointwise sum drift {:e}", inv.max_pointwise_sum_drift));
        }
        if inv.max_degenerate_pair_drift > DEGENERATE_PAIR_DRIFT {
            inv_fail.push(format!("n={n}: degenerate pair drift {:e}", inv.max_degenerate_pair_drift));
        }

        let output = result.output.as_ref().unwrap();
        let records = &output.records;
        let e0 = records[0].entropy_initial;
        let tol = ENTROPY_FACTOR * (output.dt + h * h);
        let increase = max_entropy_increase(records);
        let excess = records
            .iter()
            .map(|r| r.entropy + r.dissipation_integral - e0 * (1.0 + tol))
            .fold(f64::NEG_INFINITY, f64::max);
        worst_excess = worst_excess.max(excess);
        let min_dissipation = records.iter().map(|r| r.dissipation).fold(f64::INFINITY, f64::min);
        if increase > tol * e0.abs() {
            ent_fail.push(format!("n={n}: entropy increase {increase:e}"));
        }
        if excess > 0.0 {
            ent_fail.push(format!("n={n}: balance excess {excess:e}"));
        }
        if min_dissipation < DISSIPATION_FLOOR {
            ent_fail.push(format!("n={n}: dissipation {min_dissipation:e}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > PRESET_RUNTIME {
        inv_fail.push(format!("runtime {:.1} s", elapsed.as_secs_f64()));
    }
    PresetCheck {
        invariants: outcome(
            inv_fail.is_empty(),
            if inv_fail.is_empty() {
                format!(
                    "{name} ({class}): min {worst_min:+.1e}, drift {worst_drift:.1e}, {:.1} s",
                    elapsed.as_secs_f64()
                )
            } else {
                format!("{name}: {}", inv_fail.join("; "))
            },
        ),
        entropy: outcome(
            ent_fail.is_empty(),
            if ent_fail.is_empty() {
                format!("{name}: worst balance excess {worst_excess:.2e}")
            } else {
                format!("{name}: {}", ent_fail.join("; "))
            },
        ),
    }
}

fn equilibrium_case(config: &ExperimentConfig, out: &Path) -> (f64, f64) {
    let alpha = config.system.alpha.clone();
    let values: Vec<f64> = config
        .initial
        .iter()
        .map(|s| match s {
            InitialSpec::Constant { value } => *value,
            other => panic!("constant data expected, got {other:?}"),
        })
        .collect();
    let m = values.len();
    let sigma: Vec<f64> = values[..m - 1].iter().map(|a| a + values[m - 1]).collect();
    let root = bisection_root(&sigma, &alpha);
    let options = run_options(config, config.t_final, false);
    let mut worst: f64 = 0.0;
    for &n in &config.n_values {
        let r = execute_run(config, n, &options, Some(out)).expect("run");
        let fields = &r.output.expect("no breach").final_state.fields;
        worst = fields.field(m - 1).values().iter().map(|v| (v - root).abs()).fold(worst, f64::max);
    }
    (root, worst)
}

fn criterion_equilibrium(out: &Path) -> Outcome {
    let main = preset("df15-three-species").unwrap();
    let (root, residual) = equilibrium_case(&main, &out.join("eq-main"));
    let mut unit = main.clone();
    unit.initial = [1.0, 1.0, 0.0].map(|value| InitialSpec::Constant { value }).to_vec();
    let (unit_root, unit_residual) = equilibrium_case(&unit, &out.join("eq-unit"));
    let golden = (3.0 - 5f64.sqrt()) / 2.0;
    let pass = (root - 1.0).abs() < 1e-12
        && (unit_root - golden).abs() < 1e-12
        && residual < EQUILIBRIUM_RESIDUAL
        && unit_residual < EQUILIBRIUM_RESIDUAL;
    outcome(
        pass,
        format!("sigma=(2,2): root {root:.12}, residual {residual:.1e}; sigma=(1,1): root {unit_root:.12}, residual {unit_residual:.1e}"),
    )
}

fn criterion_picard(out: &Path) -> Outcome {
    let s = picard_demo(&out.join("picard")).expect("picard demo");
    let rows_ok = s.envelope.rows.len() == PICARD_MAX_P + 1 && s.envelope.rows.iter().all(|r| r.pass);
    let pass = rows_ok && s.contraction <= PICARD_CONTRACTION && s.oracle_distance <= PICARD_ORACLE;
    outcome(
        pass,
        format!(
            "C5 T = {:.3}, envelope {} for p <= {PICARD_MAX_P}, oracle distance {:.1e}",
            s.contraction,
            if rows_ok { "holds" } else { "FAILS" },
            s.oracle_distance
        ),
    )
}

fn criterion_regularization(out: &Path) -> Outcome {
    let config = preset("df15-a3").unwrap();
    let expected = vec![
        RegIndex::Finite(1.0),
        RegIndex::Finite(10.0),
        RegIndex::Finite(100.0),
        RegIndex::Finite(1000.0),
        RegIndex::Infinite,
    ];
    let s = study_n(&config, &out.join("study-n"), 1).expect("study");
    let diffs: Vec<String> = s
        .rows
        .iter()
        .filter_map(|r| r.consecutive_difference.map(|d| format!("{d:.2e}")))
        .collect();
    let pass = config.n_values == expected
        && config.grid.cells == vec![128]
        && s.all_invariants_held
        && s.monotone
        && s.final_gap < LIMIT_GAP;
    outcome(pass, format!("differences [{}], final gap {:.2e}", diffs.join(", "), s.final_gap))
}

fn criterion_kernel(out: &Path) -> Outcome {
    let s = kernel_check(None, &out.join("kernel")).expect("kernel check");
    let smoothing_change = s.smoothing.iter().map(|r| r.max_relative_change).fold(0.0, f64::max);
    let smoothing_ok = !s.smoothing.is_empty()
        && s.smoothing
            .iter()
            .all(|r| r.below_threshold && !r.trials.is_empty() && r.max_relative_change <= SMOOTHING_CHANGE);
    let pass = s.spec.modes == KERNEL_MODES
        && s.mass.max_mass_error <= KERNEL_MASS
        && s.mass.min_value >= -KERNEL_MASS
        && s.semigroup_error <= KERNEL_SEMIGROUP
        && s.fit.coarse.c_h.is_finite()
        && s.fit.fine.c_h.is_finite()
        && s.fit.relative_change <= KERNEL_FIT_CHANGE
        && smoothing_ok;
    outcome(
        pass,
        format!(
            "mass {:.1e}, semigroup {:.1e}, C_H {:.4} (change {:.1}%), smoothing change {:.1}%",
            s.mass.max_mass_error,
            s.semigroup_error,
            s.fit.fine.c_h,
            100.0 * s.fit.relative_change,
            100.0 * smoothing_change
        ),
    )
}

fn criterion_orders(out: &Path) -> Outcome {
    let diffusion = study_mesh(&preset("pure-diffusion").unwrap(), &out.join("mesh-diffusion"), 1).expect("mesh");
    let space: Vec<f64> = diffusion.space.iter().filter_map(|r| r.analytic_order).collect();
    let space_ok = !space.is_empty() && space.iter().all(|o| (o - SPACE_ORDER).abs() <= SPACE_ORDER_TOL);

    let canonical = study_mesh(&preset("df15-a3").unwrap(), &out.join("mesh-a3"), 1).expect("mesh");
    let lie: Vec<f64> = canonical.time_rows(Splitting::Lie).filter_map(|r| r.order).collect();
    let lie_ok = !lie.is_empty() && lie.iter().all(|&o| o >= LIE_MIN_ORDER);
    let strang = canonical
        .time_rows(Splitting::Strang)
        .find(|r| r.divisor == 2)
        .and_then(|r| r.ratio)
        .unwrap_or(f64::NAN);
    let strang_dt = canonical.time_rows(Splitting::Strang).next().map_or(f64::NAN, |r| r.dt);
    let strang_ok = (strang - STRANG_RATIO).abs() <= STRANG_RATIO_TOL;
    outcome(
        space_ok && lie_ok && strang_ok && diffusion.all_invariants_held && canonical.all_invariants_held,
        format!(
            "h orders {:?}, Lie dt orders {:?}, Strang ratio {strang:.2} at dt {strang_dt} -> {}",
            space.iter().map(|o| (o * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            lie.iter().map(|o| (o * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            strang_dt / 2.0
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let out = dir.path();
    let mut results: Vec<(String, Outcome)> = Vec::new();
    let mut record = |label: &str, o: Outcome| {
        println!("{} [{label}] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((label.to_string(), o));
    };

    record("1 exponent chains", criterion_chains(out));
    let checks: Vec<PresetCheck> = PRESET_NAMES
        .iter()
        .map(|name| check_preset(name, &out.join(name)))
        .collect();
    let (inv, ent): (Vec<Outcome>, Vec<Outcome>) = checks.into_iter().map(|c| (c.invariants, c.entropy)).unzip();
    for o in inv {
        record("2 positivity and invariants", o);
    }
    for o in ent {
        record("3 entropy balance", o);
    }
    record("4 equilibrium", criterion_equilibrium(out));
    record("5 Picard envelope", criterion_picard(out));
    record("6 regularization limit", criterion_regularization(out));
    record("7 heat kernel", criterion_kernel(out));
    record("8 discretization orders", criterion_orders(out));

    let failed: Vec<&str> = results.iter().filter(|(_, o)| !o.pass).map(|(l, _)| l.as_str()).collect();
    println!("acceptance: {} checks, {} failed", results.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
