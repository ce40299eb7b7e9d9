use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use degenrd_cli::config::ExperimentConfig;
use degenrd_cli::error::{CliError, EXIT_OK};
use degenrd_cli::{mesh, presets, run, verify};

#[derive(Debug, Parser)]
#[command(name = "degenrd", version, about = "Degenerate triangular reaction-diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario once per configured regularization index.
    Run(Common),
    /// Compare runs across regularization indices.
    StudyN(Common),
    /// Space and time self-convergence study.
    StudyMesh(Common),
    /// Replay the exponent chains in exact arithmetic.
    VerifyChains(Common),
    /// Picard iteration on the canonical pointwise scenario.
    PicardDemo(Common),
    /// Heat kernel checks and smoothing probes.
    KernelCheck(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped scenario name.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bitwise-reproducible output. Every code path is deterministic, so
    /// `false` is accepted but changes nothing.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set, num_args = 0..=1, default_missing_value = "true")]
    deterministic: bool,
    /// Worker threads for independent runs; 1 runs them in sequence.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

impl Common {
    fn load(&self, required: bool) -> Result<Option<ExperimentConfig>, CliError> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path).map(Some),
            (None, Some(name)) => presets::preset(name).map(Some),
            (None, None) if required => Err(CliError::config("config", "either --config or --preset is required")),
            (None, None) => Ok(None),
        }
    }

    fn out_dir(&self, fallback: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| run::default_out(fallback))
    }
}

fn report_breaches(summary: &run::ScenarioSummary) {
    for (n, b) in summary.breaches() {
        eprintln!(
            "n = {n}: {:?} breach at t = {} (step {}): value {:e}, tolerance {:e}; {}",
            b.kind, b.time, b.step, b.value, b.tolerance, b.detail
        );
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let common = match &cli.command {
        Command::Run(c)
        | Command::StudyN(c)
        | Command::StudyMesh(c)
        | Command::VerifyChains(c)
        | Command::PicardDemo(c)
        | Command::KernelCheck(c) => c,
    };
    if !common.deterministic {
        log::info!("non-deterministic mode requested; all code paths are deterministic regardless");
    }
    match cli.command {
        Command::Run(c) => {
            let config = c.load(true)?.expect("required");
            let summary = run::run_scenario(&config, &c.out_dir(&config.name), c.threads)?;
            report_breaches(&summary);
            for r in summary.runs.iter().filter(|r| r.breach.is_none()) {
                println!(
                    "n = {:>6}: steps {:>6}, min {:+.3e}, mass drift {:.3e}, equilibrium residual {:.3e}",
                    r.n.label(),
                    r.steps,
                    r.invariants.min_value,
                    r.invariants.max_pair_mass_drift,
                    r.equilibrium_residual
                );
            }
            Ok(summary.exit_code())
        }
        Command::StudyN(c) => {
            let config = c.load(true)?.expect("required");
            let s = run::study_n(&config, &c.out_dir(&config.name), c.threads)?;
            for r in &s.rows {
                let diff = r.consecutive_difference.map_or("-".to_string(), |d| format!("{d:.3e}"));
                println!("n = {:>6}: difference {diff:>10}, gap to limit {:.3e}", r.n.label(), r.gap_to_limit);
            }
            println!("monotone: {}, final gap {:.3e}", s.monotone, s.final_gap);
            Ok(if s.all_invariants_held { EXIT_OK } else { degenrd_cli::error::EXIT_BREACH })
        }
        Command::StudyMesh(c) => {
            let config = c.load(true)?.expect("required");
            let s = mesh::study_mesh(&config, &c.out_dir(&config.name), c.threads)?;
            for r in &s.space {
                println!(
                    "cells {:>5}: self difference {:>10}, analytic error {:>10}",
                    r.cells,
                    r.self_difference.map_or("-".into(), |v| format!("{v:.3e}")),
                    r.analytic_error.map_or("-".into(), |v| format!("{v:.3e}"))
                );
            }
            for r in &s.time {
                println!(
                    "{:?} dt {:.4e}: error {:.3e}, ratio {}",
                    r.splitting,
                    r.dt,
                    r.error,
                    r.ratio.map_or("-".into(), |v| format!("{v:.3}"))
                );
            }
            Ok(if s.all_invariants_held { EXIT_OK } else { degenrd_cli::error::EXIT_BREACH })
        }
        Command::VerifyChains(c) => {
            let r = verify::verify_chains(&c.out_dir("chains"))?;
            for chain in &r.chains {
                println!("{}: {}", chain.scenario, if chain.reached_linf() { "reaches L^inf" } else { "stuck" });
            }
            for i in &r.identities {
                println!("{}: {} ({})", i.name, i.computed, if i.pass { "ok" } else { "FAILED" });
            }
            Ok(r.exit_code())
        }
        Command::PicardDemo(c) => {
            let s = verify::picard_demo(&c.out_dir("picard"))?;
            println!(
                "C5 T = {:.4}, envelope holds: {}, oracle distance {:.3e}",
                s.contraction, s.envelope.holds, s.oracle_distance
            );
            Ok(s.exit_code())
        }
        Command::KernelCheck(c) => {
            let config = c.load(false)?;
            let s = verify::kernel_check(config.as_ref(), &c.out_dir("kernel"))?;
            println!(
                "mass error {:.3e}, semigroup error {:.3e}, C_H {:.4} (change {:.2}%)",
                s.mass.max_mass_error,
                s.semigroup_error,
                s.fit.fine.c_h,
                100.0 * s.fit.relative_change
            );
            Ok(s.exit_code())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { degenrd_cli::error::EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
