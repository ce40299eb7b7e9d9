use degenrd_cli::config::{initial_data, ExperimentConfig, InitialSpec};
use degenrd_core::kinetics::RegIndex;
use proptest::prelude::*;

fn config_with(initial: Vec<InitialSpec>, cells: usize, n_values: Vec<RegIndex>) -> ExperimentConfig {
    let mut c = degenrd_cli::presets::preset("df15-a3").unwrap();
    c.grid.cells = vec![cells];
    c.initial = initial;
    c.n_values = n_values;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expression_matches_cosine_spec(base in 0.1f64..3.0, amplitude in 0.0f64..1.0, wave in 0usize..5, cells in 2usize..64) {
        let cosine = InitialSpec::Cosine { base, amplitude, waves: vec![wave] };
        let expr = InitialSpec::Expression {
            expr: format!("{base:?} * (1.0 + {amplitude:?} * cos({wave}.0 * pi * x / Lx))"),
        };
        let a = config_with(vec![cosine.clone(), cosine.clone(), cosine], cells, vec![RegIndex::Infinite]);
        let b = config_with(vec![expr.clone(), expr.clone(), expr], cells, vec![RegIndex::Infinite]);
        let fa = initial_data(&a, a.grid().unwrap()).unwrap();
        let fb = initial_data(&b, b.grid().unwrap()).unwrap();
        for (x, y) in fa.field(0).values().iter().zip(fb.field(0).values()) {
            prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        }
    }

    #[test]
    fn configs_round_trip_through_json(
        values in proptest::collection::vec(0.0f64..5.0, 3),
        ns in proptest::collection::vec(0.5f64..1e6, 1..5),
        with_limit in any::<bool>(),
    ) {
        let initial = values.iter().map(|&value| InitialSpec::Constant { value }).collect();
        let mut n_values: Vec<RegIndex> = ns.iter().map(|&n| RegIndex::Finite(n)).collect();
        if with_limit {
            n_values.push(RegIndex::Infinite);
        }
        let c = config_with(initial, 8, n_values);
        let json = serde_json::to_string(&c).unwrap();
        prop_assert_eq!(ExperimentConfig::from_json(&json).unwrap(), c);
    }

    #[test]
    fn negative_values_are_rejected_with_their_path(species in 0usize..3, cell in 0usize..8, value in -10.0f64..-1e-12) {
        let mut values = vec![vec![1.0; 8]; 3];
        values[species][cell] = value;
        let initial = values.into_iter().map(|values| InitialSpec::Values { values }).collect();
        let c = config_with(initial, 8, vec![RegIndex::Infinite]);
        match c.validate() {
            Err(degenrd_cli::error::CliError::Config { path, .. }) => prop_assert_eq!(path, format!("initial[{species}]")),
            other => prop_assert!(false, "{:?}", other),
        }
    }
}
