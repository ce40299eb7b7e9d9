//! Simulation results checked against independent oracles: closed forms,
//! a bisection written here, and the adaptive ODE integrator.

use std::f64::consts::PI;

use degenrd_core::diagnostics::entropy_balance_check;
use degenrd_core::grid::{Field, FieldSet, Grid};
use degenrd_core::kernel::{gaussian_bound_fit, small_time_window, KernelSpec};
use degenrd_core::kinetics::{RegIndex, RegularizedRates};
use degenrd_core::model::TriangularSystem;
use degenrd_core::picard::{dormand_prince, inputs_from_trace, picard_iterate, sup_distance, OdeOptions};
use degenrd_core::stepper::{equilibrium_product, run, RunOptions, StepperConfig};

fn rates(alpha: &[f64], d: Vec<f64>, n: RegIndex) -> RegularizedRates {
    RegularizedRates::new(TriangularSystem::from_reactants(alpha, d).unwrap(), n)
}

/// Root of `prod (sigma_i - x)^alpha_i = x` by plain bisection on `[0, min sigma]`.
fn bisection_oracle(sigma: &[f64], alpha: &[f64]) -> f64 {
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

#[test]
fn equilibrium_closed_forms() {
    let r = rates(&[1.0, 1.0], vec![1.0, 1.0, 0.0], RegIndex::Infinite);
    assert!((equilibrium_product(&r, &[2.0, 2.0, 0.0]) - 1.0).abs() < 1e-14);
    let golden = (3.0 - 5f64.sqrt()) / 2.0;
    assert!((equilibrium_product(&r, &[1.0, 1.0, 0.0]) - golden).abs() < 1e-14);
    let r = rates(&[1.5, 2.0, 1.0], vec![0.0, 0.0, 1.0, 1.0], RegIndex::Finite(10.0));
    let state = [1.2, 0.7, 2.0, 0.3];
    let sigma: Vec<f64> = state[..3].iter().map(|a| a + state[3]).collect();
    assert!((equilibrium_product(&r, &state) - bisection_oracle(&sigma, &[1.5, 2.0, 1.0])).abs() < 1e-13);
}

#[test]
fn constant_data_relaxes_to_the_bisection_root() {
    let g = Grid::interval(1.0, 16).unwrap();
    let r = rates(&[1.0, 1.0], vec![1.0, 1.0, 0.0], RegIndex::Infinite);
    let options = RunOptions {
        t_final: 50.0,
        record_every: 1000,
        ..RunOptions::default()
    };
    let out = run(FieldSet::constant(g, &[1.0, 1.0, 0.0]).unwrap(), r, StepperConfig::lie(0.05), &options, &mut []).unwrap();
    let am = out.final_state.fields.field(2);
    let a1 = out.final_state.fields.field(0);
    let a2 = out.final_state.fields.field(1);
    let residual = (0..g.cell_count())
        .map(|c| (am.values()[c] - a1.values()[c] * a2.values()[c]).abs())
        .fold(0.0, f64::max);
    assert!(residual < 1e-6, "{residual}");
    assert!((am.max() - bisection_oracle(&[1.0, 1.0], &[1.0, 1.0])).abs() < 1e-6);
}

/// Spatially constant runs reduce to the cell ODE; compare against
/// Dormand-Prince on the full reaction system.
fn constant_data_error(config: StepperConfig) -> f64 {
    let alpha = [2.0, 1.0];
    let n = RegIndex::Finite(20.0);
    let r = rates(&alpha, vec![1.0, 0.0, 0.0], n);
    let g = Grid::interval(1.0, 4).unwrap();
    let initial = [1.5, 0.8, 0.1];
    let options = RunOptions {
        t_final: 1.0,
        record_every: 1000,
        ..RunOptions::default()
    };
    let out = run(FieldSet::constant(g, &initial).unwrap(), r.clone(), config, &options, &mut []).unwrap();
    let oracle = dormand_prince(
        |_, y, dy| {
            let g = r.g_scalar(y);
            dy[0] = g;
            dy[1] = g;
            dy[2] = -g;
        },
        &initial,
        &[0.0, 1.0],
        &OdeOptions::default(),
    )
    .unwrap();
    (0..3)
        .map(|s| (out.final_state.fields.field(s).values()[0] - oracle[1][s]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn constant_data_follows_the_ode_with_splitting_order() {
    let lie: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| constant_data_error(StepperConfig::lie(dt))).collect();
    let strang: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| constant_data_error(StepperConfig::strang(dt))).collect();
    for w in lie.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 1.0).abs() < 0.15, "lie {lie:?}");
    }
    for w in strang.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "strang {strang:?}");
    }
    assert!(lie[2] < 5e-3 && strang[2] < 5e-5);
}

#[test]
fn pure_diffusion_matches_cosine_decay_with_second_order_in_space() {
    let r = rates(&[1.0], vec![0.5, 1.0], RegIndex::Infinite);
    let t_final = 0.1;
    let errors: Vec<f64> = [16usize, 32, 64]
        .iter()
        .map(|&cells| {
            let g = Grid::interval(1.0, cells).unwrap();
            let initial = FieldSet::new(vec![
                Field::from_fn(g, |p| 1.0 + 0.5 * (PI * p[0]).cos()),
                Field::from_fn(g, |p| 1.0 + 0.5 * (2.0 * PI * p[0]).cos()),
            ])
            .unwrap();
            let config = StepperConfig {
                reactions_enabled: false,
                ..StepperConfig::strang(0.01)
            };
            let options = RunOptions {
                t_final,
                record_every: 1000,
                ..RunOptions::default()
            };
            let out = run(initial, r.clone(), config, &options, &mut []).unwrap();
            let exact = Field::from_fn(g, |p| 1.0 + 0.5 * (-0.5 * PI * PI * t_final).exp() * (PI * p[0]).cos());
            sup_distance(out.final_state.fields.field(0).values(), exact.values())
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.2, "{errors:?}");
    }
}

#[test]
fn entropy_balance_with_accumulated_dissipation() {
    let g = Grid::interval(1.0, 64).unwrap();
    let r = rates(&[1.0, 1.0], vec![1.0, 1.0, 0.0], RegIndex::Finite(100.0));
    let initial = FieldSet::new(
        (0..3)
            .map(|i| Field::from_fn(g, |p| [1.0, 1.5, 0.2][i] * (1.0 + 0.5 * ((i + 1) as f64 * PI * p[0]).cos())))
            .collect(),
    )
    .unwrap();
    let dt = 0.02;
    let options = RunOptions {
        t_final: 5.0,
        record_every: 5,
        ..RunOptions::default()
    };
    let out = run(initial, r, StepperConfig::lie(dt), &options, &mut []).unwrap();
    let h = g.spacing(0);
    let report = entropy_balance_check(&out.records, 10.0 * (dt + h * h));
    assert!(report.holds, "{report:?}");
    // The implicit substeps dissipate at least what is booked.
    let last = out.records.last().unwrap();
    assert!(last.entropy + last.dissipation_integral <= last.entropy_initial + 1e-10);
    assert!(out.records.iter().all(|r| r.dissipation >= -1e-12));
}

#[test]
fn stepper_trace_agrees_with_the_picard_limit() {
    // One non-diffusing reactant and a non-diffusing product; constant data
    // so the traced cell follows the pointwise equation exactly.
    let system = TriangularSystem::from_reactants(&[2.0, 1.0], vec![0.0, 1.0, 1.0]).unwrap();
    let r = RegularizedRates::new(system.clone(), RegIndex::Finite(50.0));
    let g = Grid::interval(1.0, 4).unwrap();
    let mut deviations = Vec::new();
    for dt in [0.004, 0.002] {
        let options = RunOptions {
            t_final: 1.0,
            record_every: 1000,
            trace_cell: Some(1),
            ..RunOptions::default()
        };
        let out = run(FieldSet::constant(g, &[0.6, 0.9, 0.2]).unwrap(), r.clone(), StepperConfig::lie(dt), &options, &mut []).unwrap();
        let trace = out.trace.unwrap();
        let inputs = inputs_from_trace(&system, &trace, 0).unwrap();
        let iterates = picard_iterate(&inputs, 30).unwrap();
        let limit = iterates.last().unwrap();
        let simulated: Vec<f64> = trace.states.iter().map(|s| s[0]).collect();
        deviations.push(sup_distance(limit, &simulated));
    }
    assert!(deviations[0] < 5e-3, "{deviations:?}");
    let order = (deviations[0] / deviations[1]).log2();
    assert!(order > 0.8, "{deviations:?}");
}

#[test]
fn gaussian_fit_dominates_free_space_constant() {
    for d in [0.5, 1.0, 2.0] {
        let spec = KernelSpec::interval(d, 1.0, 200).unwrap();
        let times = small_time_window(&spec, 1e-4, 1e-1, 8);
        let fit = gaussian_bound_fit(&spec, spec.default_kappa(), &times, 17).unwrap();
        let free = (4.0 * PI * d).powf(-0.5);
        assert!(fit.c_h >= free);
        // Reflection at the wall doubles the on-diagonal value.
        assert!((fit.c_h - 2.0 * free).abs() < 1e-3 * free, "{d}: {}", fit.c_h);
    }
}
