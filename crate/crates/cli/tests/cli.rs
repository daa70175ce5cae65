//! End-to-end runs of the `spikepwl` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikepwl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn summary(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("summary is JSON")
}

#[test]
fn hwplan_reports_stages_and_matches_direct_runs() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&run(
        dir.path(),
        &[
            "hwplan",
            "--model",
            "pwl2",
            "--neurons",
            "30",
            "--is",
            "25",
            "--simulate-steps",
            "200",
        ],
    ));
    assert_eq!(s["V_S"], 5);
    assert_eq!(s["D_S"], 0);
    assert_eq!(s["matches_direct"], true);
    assert_eq!(s["general_multiplies"], 0);
    let spec: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pipeline.json")).unwrap()).unwrap();
    assert_eq!(spec["spec"]["n"], 30);
    let trace = std::fs::read_to_string(dir.path().join("schedule_trace.csv")).unwrap();
    assert!(trace.starts_with("cycle,unit,neuron_id"));
}

#[test]
fn too_few_neurons_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["hwplan", "--model", "pwl3", "--neurons", "5"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn bad_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["neuron", "--model", "pwl9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unreadable_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--config", "/nonexistent/cfg.json", "neuron"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zero_input_gives_empty_spike_table() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&run(
        dir.path(),
        &["neuron", "--model", "pwl2", "--i", "0", "--duration", "100"],
    ));
    assert_eq!(s["n_spikes"], 0);
    let spikes = std::fs::read_to_string(dir.path().join("spikes.csv")).unwrap();
    assert_eq!(spikes.lines().count(), 1);
}

#[test]
fn fixed_backend_fires() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&run(
        dir.path(),
        &[
            "--backend",
            "fixed",
            "neuron",
            "--model",
            "pwl2",
            "--i",
            "10",
            "--duration",
            "200",
        ],
    ));
    assert!(s["n_spikes"].as_u64().unwrap() > 0);
}

#[test]
fn staircase_reports_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&run(
        dir.path(),
        &[
            "neuron",
            "--model",
            "original",
            "--params",
            "0.02,0.26,-52,2",
            "--staircase",
            "0,4.5,12.5,19.5",
            "--dt",
            "0.0078125",
        ],
    ));
    let labels: Vec<&str> = s["regimes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["regime"].as_str().unwrap())
        .collect();
    assert_eq!(labels, ["resting", "bursting", "bursting", "tonic-spiking"]);
}

#[test]
fn compare_gives_positive_cf() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&run(dir.path(), &["neuron", "--compare", "original,pwl2"]));
    assert!(s["cf"].as_f64().unwrap() > 0.0);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"hwplan": {"model": "pwl4", "neurons": 20, "is": 4}}"#).unwrap();
    let out = dir.path().join("o");
    let s = summary(&run(&out, &["--config", cfg.to_str().unwrap(), "hwplan"]));
    assert_eq!(s["N"], 20);
    assert_eq!(s["D_S"], 20 - 4 - 7);
    // Flags win over the file.
    let s = summary(&run(
        &out,
        &["--config", cfg.to_str().unwrap(), "hwplan", "--neurons", "25"],
    ));
    assert_eq!(s["N"], 25);
}

#[test]
fn network_runs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "--seed",
        "3",
        "network",
        "--n",
        "80",
        "--sim-ms",
        "200",
        "--model",
        "pwl3",
        "--compare",
        "original",
    ];
    let mut sa = summary(&run(a.path(), &args));
    let mut sb = summary(&run(b.path(), &args));
    sa["files"].take();
    sb["files"].take();
    assert_eq!(sa, sb);
    for f in ["raster_pwl3.csv", "raster_original.csv", "rate.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    assert!(sa["mre_percent"].as_f64().unwrap() >= 0.0);
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = [
        "--classes",
        "3",
        "--train-writers",
        "4",
        "--test-writers",
        "2",
        "--flip",
        "0.05",
    ];
    let mut train_args = vec!["train", "--epochs", "2"];
    train_args.extend(data);
    let s = summary(&run(dir.path(), &train_args));
    assert!(s["test_accuracy"].as_f64().unwrap() >= 0.5);
    let state = dir.path().join("state.json");
    assert!(state.exists() && dir.path().join("weights.csv").exists());

    let eval_dir = dir.path().join("eval");
    let mut eval_args = vec!["eval", "--state", state.to_str().unwrap()];
    eval_args.extend(data);
    let e = summary(&run(&eval_dir, &eval_args));
    assert_eq!(e["accuracy"], s["test_accuracy"]);
}

#[test]
fn json_format_writes_parseable_tables() {
    let dir = tempfile::tempdir().unwrap();
    summary(&run(
        dir.path(),
        &["--format", "json", "neuron", "--i", "10", "--duration", "50"],
    ));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("spikes.json")).unwrap()).unwrap();
    assert!(v.as_array().is_some_and(|a| !a.is_empty()));
}

#[test]
fn search_point_grid() {
    let dir = tempfile::tempdir().unwrap();
    let s = summary(&run(dir.path(), &["search", "--grid", "point", "--k", "0.75,20"]));
    assert!(s["min_cf"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("argmin.json").exists() && dir.path().join("surface.csv").exists());
}
