use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn degenrd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_degenrd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_config(t_final: f64, stepper: &str, first: &str) -> String {
    format!(
        r#"{{
        "name": "small",
        "system": {{"alpha": [1, 1], "diffusion": [1, 1, 0]}},
        "grid": {{"lengths": [1], "cells": [16]}},
        "initial": [
            {first},
            {{"kind": "cosine", "base": 0.6, "amplitude": 0.4, "waves": [2]}},
            {{"kind": "expression", "expr": "0.3 + 0.1 * cos(3 * pi * x)"}}
        ],
        "stepper": {stepper},
        "n_values": [10, "inf"],
        "t_final": {t_final},
        "observer": {{"record_every": 5}}
    }}"#
    )
}

const COSINE: &str = r#"{"kind": "cosine", "base": 1, "amplitude": 0.5, "waves": [1]}"#;

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn zero_horizon_writes_summary_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config(0.0, "{}", COSINE));
    let out = dir.path().join("out");
    let o = degenrd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["all_invariants_held"], true);
    for run in summary["runs"].as_array().unwrap() {
        assert_eq!(run["steps"], 0);
    }
}

#[test]
fn negative_initial_datum_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = r#"{"kind": "constant", "value": -0.5}"#;
    let cfg = write_config(dir.path(), &small_config(1.0, "{}", bad));
    let o = degenrd(&["run", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("initial[0]"));
}

#[test]
fn malformed_configs_and_arguments_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"system": {"alpha": [1, 1]}}"#);
    assert_eq!(degenrd(&["run", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(degenrd(&["run", "--preset", "no-such-preset"]).status.code(), Some(1));
    assert_eq!(degenrd(&["run"]).status.code(), Some(1));
    assert_eq!(degenrd(&["run", "--bogus-flag"]).status.code(), Some(1));
    assert_eq!(degenrd(&["--help"]).status.code(), Some(0));
}

#[test]
fn invariant_breach_exits_with_two_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    // Rounding alone moves the pair masses by an ulp, so a zero tolerance trips.
    let cfg = write_config(dir.path(), &small_config(1.0, r#"{"dt": 0.05, "mass-tolerance": 0}"#, COSINE));
    let out = dir.path().join("out");
    let o = degenrd(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("PairMass breach"));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["all_invariants_held"], false);
    let run = &summary["runs"][0];
    assert_eq!(run["status"], "breach");
    assert_eq!(run["breach"]["kind"], "pair-mass");
    assert!(out.join("diagnostics_10.csv").exists());
}

#[test]
fn outputs_are_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_config(0.5, r#"{"dt": 0.01}"#, COSINE));
    let mut files = Vec::new();
    for (tag, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let out = dir.path().join(tag);
        let o = degenrd(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(o.status.code(), Some(0));
        files.push(
            ["diagnostics_10.csv", "diagnostics_inf.csv", "summary.json"]
                .map(|f| std::fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(files[0], files[2]);
    let header = String::from_utf8(files[0][0].clone()).unwrap();
    assert!(header.starts_with("time,E,D,L1_1,L2_1,Lp4_1,sup_1"));
}

#[test]
fn study_n_with_repeated_index_reports_zero_difference() {
    let dir = tempfile::tempdir().unwrap();
    let body = small_config(0.5, r#"{"dt": 0.02}"#, COSINE).replace(r#"[10, "inf"]"#, "[10, 10, 100]");
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("out");
    let o = degenrd(&["study-n", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let summary = read_json(&out.join("summary.json"));
    let rows = summary["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[1]["consecutive_difference"], 0.0);
    assert_eq!(rows[3]["n"], "inf");
    assert!(out.join("study_n.csv").exists());
}

#[test]
fn study_n_at_equilibrium_reports_no_differences() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
        "system": {"alpha": [1, 1], "diffusion": [1, 1, 0]},
        "grid": {"lengths": [1], "cells": [16]},
        "initial": [
            {"kind": "constant", "value": 1},
            {"kind": "constant", "value": 1},
            {"kind": "constant", "value": 1}
        ],
        "n_values": [1, 10, 100],
        "t_final": 1
    }"#;
    let cfg = write_config(dir.path(), body);
    let out = dir.path().join("out");
    assert_eq!(degenrd(&["study-n", "--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let summary = read_json(&out.join("summary.json"));
    for row in summary["rows"].as_array().unwrap() {
        assert!(row["gap_to_limit"].as_f64().unwrap() <= 1e-14, "{row}");
    }
}

#[test]
fn study_mesh_with_constant_data_sees_no_spatial_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"{
        "system": {"alpha": [1, 1], "diffusion": [1, 1, 0]},
        "grid": {"lengths": [1], "cells": [16]},
        "initial": [
            {"kind": "constant", "value": 2},
            {"kind": "constant", "value": 2},
            {"kind": "constant", "value": 0}
        ],
        "stepper": {"dt": 0.05},
        "t_final": 1,
        "mesh_study": {"levels": [8, 16, 32], "dt_divisors": [1, 2], "reference_divisor": 8}
    }"#;
    let cfg = write_config(dir.path(), body);
    let out = dir.path().join("out");
    let o = degenrd(&["study-mesh", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&out.join("summary.json"));
    for row in summary["space"].as_array().unwrap() {
        if let Some(d) = row["self_difference"].as_f64() {
            assert!(d <= 1e-13, "{row}");
        }
    }
    assert!(out.join("mesh_space.csv").exists() && out.join("mesh_time.csv").exists());
}

#[test]
fn verification_subcommands_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let chains = dir.path().join("chains");
    assert_eq!(degenrd(&["verify-chains", "--out", chains.to_str().unwrap()]).status.code(), Some(0));
    let report = read_json(&chains.join("chains.json"));
    assert_eq!(report["all_pass"], true);
    assert_eq!(report["chains"].as_array().unwrap().len(), 7);

    let picard = dir.path().join("picard");
    assert_eq!(degenrd(&["picard-demo", "--out", picard.to_str().unwrap()]).status.code(), Some(0));
    let table = std::fs::read_to_string(picard.join("picard.csv")).unwrap();
    assert_eq!(table.lines().count(), 27);
}
