//! Shipped scenarios, selectable with `--preset`.

use degenrd_core::kinetics::RegIndex;
use degenrd_core::stepper::{DiffusionScheme, ReactionSolver, Splitting, StepperConfig};

use crate::config::{ExperimentConfig, GridSpec, InitialSpec, MeshStudySpec, ObserverSpec, SystemSpec};
use crate::error::CliError;

pub const PRESET_NAMES: [&str; 8] = [
    "df15-three-species",
    "df15-a3",
    "df15-a1",
    "df15-a1-pair",
    "df15-a2",
    "m4-a1-frac",
    "m4-a2-pair",
    "pure-diffusion",
];

fn cosine(base: f64, amplitude: f64, wave: usize) -> InitialSpec {
    InitialSpec::Cosine {
        base,
        amplitude,
        waves: vec![wave],
    }
}

fn interval_grid(cells: usize) -> GridSpec {
    GridSpec {
        lengths: vec![1.0],
        cells: vec![cells],
    }
}

fn n_sweep() -> Vec<RegIndex> {
    vec![
        RegIndex::Finite(1.0),
        RegIndex::Finite(10.0),
        RegIndex::Finite(100.0),
        RegIndex::Finite(1000.0),
        RegIndex::Infinite,
    ]
}

fn base(name: &str, alpha: Vec<f64>, diffusion: Vec<f64>, initial: Vec<InitialSpec>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        system: SystemSpec { alpha, diffusion },
        grid: interval_grid(128),
        initial,
        stepper: StepperConfig::lie(0.01),
        n_values: vec![RegIndex::Finite(1000.0), RegIndex::Infinite],
        t_final: 50.0,
        observer: ObserverSpec {
            record_every: 50,
            lp_exponents: vec![2.0, 4.0],
        },
        mesh_study: MeshStudySpec {
            t_final: Some(1.0),
            ..MeshStudySpec::default()
        },
        seed: 0,
    }
}

/// Three species with reactant data away from equilibrium.
fn three_species_data() -> Vec<InitialSpec> {
    vec![cosine(1.0, 0.5, 1), cosine(0.6, 0.4, 2), cosine(0.3, 0.5, 3)]
}

pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    let config = match name {
        "df15-three-species" => {
            let mut c = base(
                name,
                vec![1.0, 1.0],
                vec![1.0, 1.0, 0.0],
                vec![
                    InitialSpec::Constant { value: 2.0 },
                    InitialSpec::Constant { value: 2.0 },
                    InitialSpec::Constant { value: 0.0 },
                ],
            );
            c.stepper = StepperConfig::lie(0.05);
            c
        }
        "df15-a3" => {
            let data = vec![cosine(0.5, 0.5, 1), cosine(0.3, 0.4, 2), cosine(0.15, 0.5, 3)];
            let mut c = base(name, vec![1.0, 1.0], vec![1.0, 1.0, 0.0], data);
            c.n_values = n_sweep();
            c.mesh_study.time_dt = Some(0.025);
            c.mesh_study.reference_divisor = 64;
            c
        }
        "df15-a1" => base(name, vec![1.0, 1.0], vec![0.0, 1.0, 1.0], three_species_data()),
        "df15-a1-pair" => base(name, vec![1.0, 1.0], vec![0.0, 0.0, 1.0], three_species_data()),
        "df15-a2" => base(name, vec![1.0, 1.0], vec![0.0, 1.0, 0.0], three_species_data()),
        "m4-a1-frac" => base(
            name,
            vec![1.5, 2.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![cosine(1.0, 0.5, 1), cosine(0.8, 0.3, 2), cosine(0.7, 0.4, 1), cosine(0.2, 0.5, 2)],
        ),
        "m4-a2-pair" => base(
            name,
            vec![1.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![cosine(1.0, 0.5, 1), cosine(0.8, 0.3, 2), cosine(0.7, 0.4, 1), cosine(0.2, 0.5, 2)],
        ),
        "pure-diffusion" => {
            let mut c = base(
                name,
                vec![1.0, 1.0],
                vec![1.0, 0.5, 0.25],
                vec![cosine(1.0, 0.5, 1), cosine(1.0, 0.5, 2), cosine(1.0, 0.5, 1)],
            );
            c.stepper = StepperConfig {
                reactions_enabled: false,
                splitting: Splitting::Strang,
                diffusion_scheme: DiffusionScheme::Exponential,
                reaction_solver: ReactionSolver::CellNewtonRichardson,
                ..StepperConfig::lie(0.01)
            };
            c.n_values = vec![RegIndex::Infinite];
            c.t_final = 0.1;
            c.mesh_study.t_final = Some(0.1);
            c
        }
        other => {
            return Err(CliError::config(
                "preset",
                format!("unknown preset {other:?}; available: {}", PRESET_NAMES.join(", ")),
            ))
        }
    };
    config.validate()?;
    Ok(config)
}
