use std::f64::consts::PI;

use degenrd_core::bootstrap::{holder_conjugate, young_convolution, Exponent};
use degenrd_core::diagnostics::entropy;
use degenrd_core::grid::{integrate, Field, FieldSet, Grid};
use degenrd_core::kernel::{heat_kernel_eval, image_kernel_eval, KernelSpec};
use degenrd_core::kinetics::{entropy_kernel, log_inequality_slack, RegIndex, RegularizedRates};
use degenrd_core::model::{quasi_positivity_check, triangular_domination_check, TriangularSystem};
use degenrd_core::picard::{picard_iterate, PicardBoundConstants, PointwiseInputs};
use degenrd_core::stepper::{
    equilibrium_product, reaction_cell_solve, run, CellSolveOptions, ReactionSolver, RunOptions, Stepper,
    StepperConfig,
};
use num::BigRational;
use num::One;
use proptest::prelude::*;

fn reg_index() -> impl Strategy<Value = RegIndex> {
    prop_oneof![
        Just(RegIndex::Infinite),
        (0.5f64..1e4).prop_map(RegIndex::Finite),
    ]
}

fn solver() -> impl Strategy<Value = ReactionSolver> {
    prop_oneof![
        Just(ReactionSolver::CellNewton),
        Just(ReactionSolver::CellNewtonRichardson),
        Just(ReactionSolver::FrozenExponential),
    ]
}

/// Reactant exponents and a cell state with at least one reactant.
fn cell_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..4).prop_flat_map(|r| {
        (
            prop::collection::vec(0.25f64..3.5, r),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], r + 1),
        )
    })
}

fn cell_entropy(alpha: &[f64], state: &[f64]) -> f64 {
    state.iter().zip(alpha).map(|(&a, &w)| w * entropy_kernel(a)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn reaction_solve_keeps_sums_positivity_and_bracket(
        (alpha, state) in cell_case(),
        n in reg_index(),
        dt in 1e-4f64..5.0,
        solver in solver(),
    ) {
        let m = state.len();
        let rates = RegularizedRates::new(TriangularSystem::from_reactants(&alpha, vec![1.0; m]).unwrap(), n);
        let mut next = state.clone();
        reaction_cell_solve(&mut next, &rates, dt, solver, &CellSolveOptions::default());
        let upper = state[..m - 1].iter().map(|a| a + state[m - 1]).fold(f64::INFINITY, f64::min);
        prop_assert!(next.iter().all(|&v| v >= 0.0));
        prop_assert!(next[m - 1] <= upper);
        for i in 0..m - 1 {
            let before = state[i] + state[m - 1];
            let after = next[i] + next[m - 1];
            prop_assert!((before - after).abs() <= 4.0 * f64::EPSILON * before.max(1.0));
        }
    }

    #[test]
    fn implicit_reaction_step_never_raises_cell_entropy(
        (alpha, state) in cell_case(),
        n in reg_index(),
        dt in 1e-4f64..5.0,
        richardson in any::<bool>(),
    ) {
        let m = state.len();
        let system = TriangularSystem::from_reactants(&alpha, vec![1.0; m]).unwrap();
        let full = system.alpha().to_vec();
        let rates = RegularizedRates::new(system, n);
        let solver = if richardson { ReactionSolver::CellNewtonRichardson } else { ReactionSolver::CellNewton };
        let mut next = state.clone();
        reaction_cell_solve(&mut next, &rates, dt, solver, &CellSolveOptions::default());
        let (e0, e1) = (cell_entropy(&full, &state), cell_entropy(&full, &next));
        prop_assert!(e1 <= e0 + 1e-12 * e0.abs().max(1.0), "{} -> {}", e0, e1);
    }

    #[test]
    fn product_moves_toward_equilibrium(
        (alpha, state) in cell_case(),
        dt in 1e-3f64..2.0,
    ) {
        let m = state.len();
        let rates = RegularizedRates::new(TriangularSystem::from_reactants(&alpha, vec![1.0; m]).unwrap(), RegIndex::Infinite);
        let star = equilibrium_product(&rates, &state);
        let mut next = state.clone();
        reaction_cell_solve(&mut next, &rates, dt, ReactionSolver::CellNewton, &CellSolveOptions::default());
        let slack = 1e-12 * star.max(1.0);
        prop_assert!((next[m - 1] - star).abs() <= (state[m - 1] - star).abs() + slack);
    }

    #[test]
    fn domination_holds_on_random_states(
        (alpha, state) in cell_case(),
    ) {
        let m = state.len();
        let system = TriangularSystem::from_reactants(&alpha, vec![1.0; m]).unwrap();
        let scaled: Vec<f64> = state.iter().map(|v| v.min(1.0)).collect();
        // The unit box keeps products of powers below the linear bound.
        prop_assert!(triangular_domination_check(&system, &[scaled]).unwrap().holds());
    }

    #[test]
    fn quasi_positivity_with_positive_exponents(
        (alpha, state) in cell_case(),
        zero in 0usize..4,
    ) {
        let m = state.len();
        let system = TriangularSystem::from_reactants(&alpha, vec![1.0; m]).unwrap();
        let mut s = state.clone();
        s[zero % m] = 0.0;
        prop_assert!(quasi_positivity_check(&system, &[s]).unwrap().holds());
    }

    #[test]
    fn entropy_density_is_nonnegative(a in 0.0f64..1e6) {
        prop_assert!(entropy_kernel(a) >= 0.0);
    }

    #[test]
    fn log_inequality_has_nonnegative_slack(x in 1e-6f64..1e3, y in 1e-6f64..1e3, kappa in 1.01f64..50.0) {
        prop_assert!(log_inequality_slack(x, y, kappa) >= -1e-9 * (x + y));
    }

    #[test]
    fn holder_and_young_are_exact(pn in 1i64..60, pd in 1i64..60, qn in 1i64..60, qd in 1i64..60) {
        prop_assume!(pn > pd && qn >= qd);
        let p = Exponent::ratio(pn, pd);
        let q = Exponent::ratio(qn, qd);
        let conj = holder_conjugate(&p).unwrap();
        prop_assert_eq!(p.reciprocal() + conj.reciprocal(), BigRational::one());
        if let Ok(out) = young_convolution(&p, &q) {
            prop_assert_eq!(BigRational::one() + out.reciprocal(), p.reciprocal() + q.reciprocal());
        }
    }

    #[test]
    fn kernel_is_symmetric_and_matches_images(
        t in 1e-3f64..0.5,
        x in 0.0f64..1.0,
        y in 0.0f64..1.0,
        d in 0.2f64..3.0,
    ) {
        let spec = KernelSpec::interval(d, 1.0, 300).unwrap();
        let a = heat_kernel_eval(&spec, t, &[x], &[y]).unwrap();
        let b = heat_kernel_eval(&spec, t, &[y], &[x]).unwrap();
        prop_assert_eq!(a.value, b.value);
        let img = image_kernel_eval(&spec, t, &[x], &[y]).unwrap();
        prop_assert!((a.value - img).abs() <= 1e-9 * img.max(1.0) + a.tail_bound);
        prop_assert!(img >= 0.0);
    }

    #[test]
    fn picard_iterates_stay_in_the_bound(
        initial in 0.0f64..2.0,
        base in 0.0f64..1.0,
        amp in 0.0f64..1.0,
        alpha_j in 1.0f64..3.0,
    ) {
        let times: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
        let inputs = PointwiseInputs {
            initial,
            alpha_j,
            offsets: vec![(0.5, 1.0)],
            driver_am: times.iter().map(|t| base + amp * (5.0 * t).sin().abs()).collect(),
            drivers_lambda2: vec![(times.iter().map(|t| 0.3 + amp * t).collect(), 1.5)],
            inverse_phi: vec![1.0; times.len()],
            times,
        };
        let c = PicardBoundConstants::from_inputs(&inputs).unwrap();
        for it in picard_iterate(&inputs, 6).unwrap() {
            prop_assert!(it.iter().all(|&v| v >= 0.0 && v <= c.c4 + 1e-12));
        }
    }
}

fn random_fields(grid: Grid, amplitudes: &[f64], base: &[f64]) -> FieldSet {
    let fields = base
        .iter()
        .zip(amplitudes)
        .enumerate()
        .map(|(i, (&b, &a))| {
            Field::from_fn(grid, |p| {
                let wave = ((i + 1) as f64 * PI * p[0]).cos() * (PI * p[1]).cos();
                b * (1.0 + a * wave)
            })
        })
        .collect();
    FieldSet::new(fields).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_steps_keep_structural_invariants(
        base in prop::collection::vec(0.0f64..3.0, 3),
        amp in prop::collection::vec(0.0f64..1.0, 3),
        d in prop::collection::vec(prop_oneof![Just(0.0), 0.1f64..2.0], 3),
        strang in any::<bool>(),
        two_d in any::<bool>(),
        n in reg_index(),
    ) {
        let grid = if two_d { Grid::rectangle([1.0, 1.0], [10, 8]).unwrap() } else { Grid::interval(1.0, 32).unwrap() };
        let rates = RegularizedRates::new(TriangularSystem::from_reactants(&[1.0, 2.0], d).unwrap(), n);
        let config = if strang { StepperConfig::strang(0.05) } else { StepperConfig::lie(0.05) };
        let initial = random_fields(grid, &amp, &base);
        let options = RunOptions { t_final: 0.5, record_every: 5, ..RunOptions::default() };
        let out = run(initial.clone(), rates, config, &options, &mut []).unwrap();
        prop_assert!(out.invariants.min_value >= -1e-12);
        prop_assert!(out.invariants.max_pair_mass_drift <= 1e-8);
        prop_assert!(out.invariants.max_degenerate_pair_drift <= 1e-10);
        prop_assert!(out.invariants.max_pointwise_sum_step_change <= 1e-12);
        prop_assert!(out.invariants.max_entropy_increase <= 1e-12);
        let last = out.records.last().unwrap();
        prop_assert!(last.entropy <= entropy(&initial, &[1.0, 2.0, 1.0]) + 1e-12);
    }

    #[test]
    fn diffusion_conserves_mass_and_positivity(
        base in prop::collection::vec(0.0f64..3.0, 3),
        amp in prop::collection::vec(0.0f64..1.0, 3),
        dt in 1e-4f64..1.0,
        exact in any::<bool>(),
        two_d in any::<bool>(),
    ) {
        let grid = if two_d { Grid::rectangle([1.0, 2.0], [9, 11]).unwrap() } else { Grid::interval(2.0, 40).unwrap() };
        let rates = RegularizedRates::new(TriangularSystem::from_reactants(&[1.0, 1.0], vec![1.0, 0.5, 2.0]).unwrap(), RegIndex::Infinite);
        let mut config = StepperConfig::lie(dt);
        if exact {
            config = StepperConfig { diffusion_scheme: degenrd_core::stepper::DiffusionScheme::Exponential, ..config };
        }
        let mut stepper = Stepper::new(rates, grid, config).unwrap();
        let mut fields = random_fields(grid, &amp, &base);
        let before: Vec<f64> = fields.fields().iter().map(integrate).collect();
        stepper.diffusion_substep(&mut fields, dt).unwrap();
        for (f, b) in fields.fields().iter().zip(before) {
            prop_assert!((integrate(f) - b).abs() <= 1e-10 * b.max(1.0));
            prop_assert!(f.min() >= -1e-14);
        }
    }
}
