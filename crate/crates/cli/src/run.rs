//! Single runs, `run` and `study-n`.

use std::fs::File;
use std::path::{Path, PathBuf};

use degenrd_core::diagnostics::{entropy_balance_check, DiagnosticsRecord, EntropyBalanceReport};
use degenrd_core::grid::FieldSet;
use degenrd_core::kinetics::RegIndex;
use degenrd_core::stepper::{
    equilibrium_product, run, BreachReport, InvariantSummary, Observer, RunError, RunOptions, RunOutput,
    SimulationState,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{initial_data, ExperimentConfig};
use crate::error::{CliError, EXIT_BREACH, EXIT_OK};

/// Version of every JSON summary written by the tool.
pub const SCHEMA_VERSION: u32 = 1;

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), value)?;
    Ok(())
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Internal(format!("{other:?}")),
    })
}

/// Runs `f` over `items`, on a dedicated pool when `threads > 1`. Results
/// keep the input order.
pub fn map_runs<T, R, F>(threads: usize, items: &[T], f: F) -> Result<Vec<R>, CliError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, CliError> + Sync + Send,
{
    if threads <= 1 {
        return items.iter().map(&f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

/// Streams diagnostics rows to CSV as they are produced, so a breached run
/// still leaves its history behind.
struct CsvObserver {
    writer: csv::Writer<File>,
    header_written: bool,
    error: Option<csv::Error>,
}

impl Observer for CsvObserver {
    fn on_record(&mut self, _state: &SimulationState, record: &DiagnosticsRecord) {
        if self.error.is_some() {
            return;
        }
        let mut write = || -> Result<(), csv::Error> {
            if !self.header_written {
                self.writer.write_record(record.csv_header())?;
                self.header_written = true;
            }
            self.writer.write_record(record.csv_row())
        };
        if let Err(e) = write() {
            self.error = Some(e);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeciesFinal {
    pub species: usize,
    pub l1: f64,
    pub l2: f64,
    pub lp: Vec<(f64, f64)>,
    pub sup: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub n: RegIndex,
    pub diagnostics_file: String,
    pub status: RunStatus,
    pub steps: u64,
    pub dt: f64,
    pub final_time: f64,
    pub final_norms: Vec<SpeciesFinal>,
    pub invariants: InvariantSummary,
    pub entropy_initial: f64,
    pub entropy_final: f64,
    pub dissipation_integral: f64,
    pub entropy_balance: Option<EntropyBalanceReport>,
    /// Largest `|a_m - x*|` over cells, `x*` the cellwise equilibrium of the
    /// reactant-product sums.
    pub equilibrium_residual: f64,
    pub breach: Option<BreachReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    Breach,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub schema_version: u32,
    pub name: String,
    pub t_final: f64,
    pub cells: Vec<usize>,
    pub runs: Vec<RunSummary>,
    pub all_invariants_held: bool,
}

impl ScenarioSummary {
    pub fn exit_code(&self) -> i32 {
        if self.all_invariants_held {
            EXIT_OK
        } else {
            EXIT_BREACH
        }
    }

    pub fn breaches(&self) -> impl Iterator<Item = (&RegIndex, &BreachReport)> {
        self.runs.iter().filter_map(|r| r.breach.as_ref().map(|b| (&r.n, b)))
    }
}

/// A finished run together with what was written for it.
pub struct RunResult {
    pub summary: RunSummary,
    pub output: Option<RunOutput>,
}

pub fn run_options(config: &ExperimentConfig, t_final: f64, snapshots: bool) -> RunOptions {
    RunOptions {
        t_final,
        record_every: config.observer.record_every,
        lp_exponents: config.observer.lp_exponents.clone(),
        trace_cell: None,
        snapshot_every: snapshots.then_some(config.observer.record_every),
    }
}

fn final_norms(fields: &FieldSet, exponents: &[f64]) -> Vec<SpeciesFinal> {
    use degenrd_core::diagnostics::lp_norm;
    fields
        .fields()
        .iter()
        .enumerate()
        .map(|(i, f)| SpeciesFinal {
            species: i + 1,
            l1: lp_norm(f, 1.0),
            l2: lp_norm(f, 2.0),
            lp: exponents.iter().map(|&p| (p, lp_norm(f, p))).collect(),
            sup: f.max(),
            min: f.min(),
        })
        .collect()
}

pub fn equilibrium_residual(config: &ExperimentConfig, n: RegIndex, fields: &FieldSet) -> Result<f64, CliError> {
    let rates = config.rates(n)?;
    let m = fields.species();
    let mut state = vec![0.0; m];
    let mut worst: f64 = 0.0;
    for c in 0..fields.grid().cell_count() {
        fields.cell_state(c, &mut state);
        worst = worst.max((state[m - 1] - equilibrium_product(&rates, &state)).abs());
    }
    Ok(worst)
}

/// One run at regularization index `n`; writes `diagnostics_<n>.csv` into
/// `out` when given.
pub fn execute_run(
    config: &ExperimentConfig,
    n: RegIndex,
    options: &RunOptions,
    out: Option<&Path>,
) -> Result<RunResult, CliError> {
    let grid = config.grid()?;
    let initial = initial_data(config, grid)?;
    let rates = config.rates(n)?;
    let file_name = format!("diagnostics_{}.csv", n.label());
    let mut observer = match out {
        Some(dir) => {
            create_dir(dir)?;
            Some(CsvObserver {
                writer: csv_writer(&dir.join(&file_name))?,
                header_written: false,
                error: None,
            })
        }
        None => None,
    };
    let mut observers: Vec<&mut dyn Observer> = Vec::new();
    if let Some(o) = observer.as_mut() {
        observers.push(o);
    }
    log::info!("{}: n = {n}, T = {}", config.name, options.t_final);
    let result = run(initial.clone(), rates, config.stepper.clone(), options, &mut observers);
    if let Some(mut o) = observer {
        if let Some(e) = o.error.take() {
            return Err(e.into());
        }
        o.writer.flush().map_err(|source| CliError::Io {
            path: out.unwrap_or(Path::new(".")).join(&file_name),
            source,
        })?;
    }
    let entropy0 = degenrd_core::diagnostics::entropy(&initial, config.system()?.alpha());
    match result {
        Ok(output) => {
            let h = grid.max_spacing();
            let tolerance = config.stepper.entropy_tolerance_factor * (output.dt + h * h);
            let balance = (!output.records.is_empty()).then(|| entropy_balance_check(&output.records, tolerance));
            let last = output.records.last();
            let summary = RunSummary {
                n,
                diagnostics_file: file_name,
                status: RunStatus::Ok,
                steps: output.steps,
                dt: output.dt,
                final_time: output.final_state.time,
                final_norms: final_norms(&output.final_state.fields, &config.observer.lp_exponents),
                invariants: output.invariants.clone(),
                entropy_initial: entropy0,
                entropy_final: last.map_or(entropy0, |r| r.entropy),
                dissipation_integral: last.map_or(0.0, |r| r.dissipation_integral),
                entropy_balance: balance,
                equilibrium_residual: equilibrium_residual(config, n, &output.final_state.fields)?,
                breach: None,
            };
            Ok(RunResult {
                summary,
                output: Some(output),
            })
        }
        Err(RunError::Breach(report)) => {
            let summary = RunSummary {
                n,
                diagnostics_file: file_name,
                status: RunStatus::Breach,
                steps: report.step,
                dt: 0.0,
                final_time: report.time,
                final_norms: Vec::new(),
                invariants: InvariantSummary::default(),
                entropy_initial: entropy0,
                entropy_final: f64::NAN,
                dissipation_integral: f64::NAN,
                entropy_balance: None,
                equilibrium_residual: f64::NAN,
                breach: Some(*report),
            };
            Ok(RunResult { summary, output: None })
        }
        Err(RunError::Options(m)) => Err(CliError::config("run", m)),
        Err(e) => Err(CliError::Internal(e.to_string())),
    }
}

/// `run`: one run per configured `n`; writes the diagnostics files and
/// `summary.json`.
pub fn run_scenario(config: &ExperimentConfig, out: &Path, threads: usize) -> Result<ScenarioSummary, CliError> {
    create_dir(out)?;
    let options = run_options(config, config.t_final, false);
    let runs = map_runs(threads, &config.n_values, |&n| {
        execute_run(config, n, &options, Some(out)).map(|r| r.summary)
    })?;
    let summary = ScenarioSummary {
        schema_version: SCHEMA_VERSION,
        name: config.name.clone(),
        t_final: config.t_final,
        cells: config.grid.cells.clone(),
        all_invariants_held: runs.iter().all(|r| r.status == RunStatus::Ok),
        runs,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub n: RegIndex,
    /// Sup over space-time of the difference to the previous `n`.
    pub consecutive_difference: Option<f64>,
    /// Sup over space-time of the difference to the limit system.
    pub gap_to_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub schema_version: u32,
    pub name: String,
    pub t_final: f64,
    pub rows: Vec<StudyRow>,
    /// Consecutive differences never increase.
    pub monotone: bool,
    /// Gaps to the limit never increase.
    pub gaps_monotone: bool,
    /// Gap of the largest finite `n`.
    pub final_gap: f64,
    pub runs: Vec<RunSummary>,
    pub all_invariants_held: bool,
}

fn spacetime_sup_difference(a: &[(f64, FieldSet)], b: &[(f64, FieldSet)]) -> Result<f64, CliError> {
    if a.len() != b.len() {
        return Err(CliError::Internal(format!("snapshot counts differ: {} and {}", a.len(), b.len())));
    }
    let mut worst: f64 = 0.0;
    for ((ta, fa), (tb, fb)) in a.iter().zip(b) {
        if ta != tb {
            return Err(CliError::Internal(format!("snapshot times differ: {ta} and {tb}")));
        }
        for (x, y) in fa.fields().iter().zip(fb.fields()) {
            for (u, v) in x.values().iter().zip(y.values()) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    Ok(worst)
}

/// Regularization indices of a study: ascending, with the limit appended
/// when missing.
pub fn study_indices(config: &ExperimentConfig) -> Result<Vec<RegIndex>, CliError> {
    let mut ns = config.n_values.clone();
    if !ns.iter().any(RegIndex::is_infinite) {
        ns.push(RegIndex::Infinite);
    }
    ns.sort_by(|a, b| a.as_f64().total_cmp(&b.as_f64()));
    if ns.iter().filter(|n| !n.is_infinite()).count() < 2 {
        return Err(CliError::config("n_values", "a study needs at least two finite indices"));
    }
    if ns.iter().filter(|n| n.is_infinite()).count() > 1 {
        return Err(CliError::config("n_values", "the limit system is listed more than once"));
    }
    Ok(ns)
}

/// `study-n`: identical runs for every `n`, compared in the sup norm over
/// the recorded space-time samples.
pub fn study_n(config: &ExperimentConfig, out: &Path, threads: usize) -> Result<StudySummary, CliError> {
    create_dir(out)?;
    let ns = study_indices(config)?;
    let options = run_options(config, config.t_final, true);
    let mut distinct = ns.clone();
    distinct.dedup();
    let results = map_runs(threads, &distinct, |&n| execute_run(config, n, &options, Some(out)))?;
    let runs: Vec<RunSummary> = results.iter().map(|r| r.summary.clone()).collect();
    let all_held = runs.iter().all(|r| r.status == RunStatus::Ok);
    let mut rows = Vec::new();
    if all_held {
        let snaps: Vec<&[(f64, FieldSet)]> = ns
            .iter()
            .map(|n| {
                let k = distinct.iter().position(|d| d == n).unwrap_or(0);
                results[k].output.as_ref().map_or(&[][..], |o| &o.snapshots[..])
            })
            .collect();
        let limit = snaps[snaps.len() - 1];
        for (k, &n) in ns.iter().enumerate().take(ns.len() - 1) {
            let consecutive_difference = if k == 0 {
                None
            } else {
                Some(spacetime_sup_difference(snaps[k - 1], snaps[k])?)
            };
            rows.push(StudyRow {
                n,
                consecutive_difference,
                gap_to_limit: spacetime_sup_difference(snaps[k], limit)?,
            });
        }
        let last = ns.len() - 1;
        rows.push(StudyRow {
            n: ns[last],
            consecutive_difference: Some(spacetime_sup_difference(snaps[last - 1], limit)?),
            gap_to_limit: 0.0,
        });
    }
    let diffs: Vec<f64> = rows.iter().filter_map(|r| r.consecutive_difference).collect();
    let finite_gaps: Vec<f64> = rows.iter().filter(|r| !r.n.is_infinite()).map(|r| r.gap_to_limit).collect();
    let summary = StudySummary {
        schema_version: SCHEMA_VERSION,
        name: config.name.clone(),
        t_final: config.t_final,
        monotone: all_held && diffs.windows(2).all(|w| w[1] <= w[0]),
        gaps_monotone: all_held && finite_gaps.windows(2).all(|w| w[1] <= w[0]),
        final_gap: finite_gaps.last().copied().unwrap_or(f64::NAN),
        rows,
        runs,
        all_invariants_held: all_held,
    };
    let mut w = csv_writer(&out.join("study_n.csv"))?;
    w.write_record(["n", "consecutive_difference", "gap_to_limit"])?;
    for r in &summary.rows {
        let diff = r.consecutive_difference.map_or(String::new(), |d| format!("{d:.12e}"));
        w.write_record([r.n.label(), diff, format!("{:.12e}", r.gap_to_limit)])?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: out.join("study_n.csv"),
        source,
    })?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn default_out(name: &str) -> PathBuf {
    PathBuf::from("out").join(if name.is_empty() { "run" } else { name })
}
