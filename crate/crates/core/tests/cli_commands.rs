use std::path::Path;
use std::process::Command;

use netload::cli::{SENSITIVITY_FILE, SUMMARY_FILE, TRACE_VIEW_FILE};
use netload::training::TRAIN_REPORT_HEADER;

fn netload(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_netload")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = netload(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

const SMALL: [&str; 6] = ["--set", "synth.n_years=1", "--set", "window.look_back=8", "--set", "model.fcnn_hidden=4,4"];

#[test]
fn generate_writes_dataset_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    ok(&[&["generate", "--out", out.to_str().unwrap()], &SMALL[..2]].concat());
    assert_eq!(read(&out.join("dataset.csv")).lines().count(), 8761);
    let stats: serde_json::Value = serde_json::from_str(&read(&out.join("dataset_stats.json"))).unwrap();
    assert_eq!(stats["rows"], 8760);
    assert!(read(&out.join("config.txt")).contains("synth.n_years = 1\n"));
}

#[test]
fn train_then_evaluate_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    ok(&[&["generate", "--out", gen.to_str().unwrap()], &SMALL[..2]].concat());
    let data = gen.join("dataset.csv");
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    let common = [&["--data", data.to_str().unwrap(), "--out", run_s, "--epochs", "1"][..], &SMALL[2..]].concat();
    ok(&[&["train"][..], &common].concat());
    let loss = read(&run.join("fcnn_direct_net_load_loss.csv"));
    assert_eq!(loss.lines().next().unwrap(), TRAIN_REPORT_HEADER);
    assert_eq!(loss.lines().count(), 2);
    assert!(run.join("fcnn_direct_net_load.ckpt").exists());
    assert!(run.join("fcnn_direct_net_load_best.ckpt").exists());

    let manifest = run.join("fcnn_direct_manifest.json");
    ok(&[&["evaluate", "--manifest", manifest.to_str().unwrap()][..], &common].concat());
    let trained: serde_json::Value = serde_json::from_str(&read(&run.join("fcnn_direct_report.json"))).unwrap();
    let evaluated: serde_json::Value = serde_json::from_str(&read(&run.join("fcnn_direct_evaluation.json"))).unwrap();
    assert_eq!(trained["metrics"], evaluated["metrics"]);
}

#[test]
fn missing_data_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let res = netload(&["train", "--data", "/definitely/not/here.csv", "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(!out.exists());
}

#[test]
fn bad_flags_and_keys_fail() {
    assert!(!netload(&["train", "--set", "train.nope=1"]).status.success());
    assert!(!netload(&["train", "--model", "gru"]).status.success());
    assert!(!netload(&["frobnicate"]).status.success());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "seed = 3\nsynth.n_years = 1\ntrain.epochs = 1\nsensitivity.horizons = 1, 2\n").unwrap();
    let out = dir.path().join("sens");
    ok(&[
        &["sensitivity", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", out.to_str().unwrap()][..],
        &SMALL[2..],
    ]
    .concat());
    let csv = read(&out.join(SENSITIVITY_FILE));
    assert_eq!(csv.lines().next().unwrap(), "lookahead,mape,rmspe,cod");
    assert_eq!(csv.lines().count(), 3);
    assert!(read(&out.join("config.txt")).starts_with("seed = 4\n"));
}

#[test]
fn compare_emits_summary_and_trace_view() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let args = [
        &["compare", "--out", out.to_str().unwrap(), "--epochs", "1", "--set", "model.lstm_hidden=2,2"][..],
        &SMALL[..],
    ]
    .concat();
    ok(&args);
    let summary = read(&out.join(SUMMARY_FILE));
    assert_eq!(summary.lines().count(), 5);
    assert_eq!(summary.lines().next().unwrap(), "method,mape,rmspe,r2,ape_max,ape_min,ape_median,ape_std");
    assert_eq!(read(&out.join(TRACE_VIEW_FILE)).lines().count(), 301);
    let first = summary.clone();
    ok(&args);
    assert_eq!(read(&out.join(SUMMARY_FILE)), first);
}
