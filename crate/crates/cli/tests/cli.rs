use std::path::Path;
use std::process::{Command, Output};

use bicausal::model::{simulate, IvScenario, StructuralParams};
use bicausal::numerics::RngStream;
use bicausal_cli::dataset::{load_csv, write_dataset_csv, ColumnSchema};
use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bicausal"))
        .current_dir(dir)
        .env("BICAUSAL_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Exit code and the error payload written to stderr.
fn failure(dir: &Path, args: &[&str]) -> (i32, Value) {
    let out = run(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let payload: Value = serde_json::from_slice(&out.stderr).expect("stderr is one JSON object");
    assert_eq!(payload["exit_code"].as_i64(), out.status.code().map(i64::from));
    (out.status.code().unwrap(), payload)
}

fn simulated(dir: &Path, name: &str, n: usize) {
    ok(dir, &["simulate", "--out", name, "--n", &n.to_string(), "--seed", "11"]);
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn sweep_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn simulate_then_load_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = simulate(&StructuralParams::benchmark(), &IvScenario::GaussianIvs, 300, RngStream::new(5, 0)).unwrap();
    let path = dir.path().join("d.csv");
    write_dataset_csv(&path, &d).unwrap();
    let back = load_csv(&path, &ColumnSchema::default()).unwrap().data;
    assert_eq!(back.x, d.x);
    assert_eq!(back.y, d.y);
    assert_eq!(back.z, d.z);
    assert_eq!(back.w, d.w);
    assert_eq!(back.q, d.q);
}

#[test]
fn uniform_scenario_keeps_instruments_in_range() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--out", "u.csv", "--n", "2000", "--scenario", "uniform"]);
    let d = load_csv(&dir.path().join("u.csv"), &ColumnSchema::default()).unwrap().data;
    assert!(d.z.iter().chain(&d.w).all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn unit_feedback_product_is_rejected_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let (code, payload) = failure(dir.path(), &["simulate", "--out", "bad.csv", "--set", "beta_xy=2", "--set", "beta_yx=0.5"]);
    assert_eq!(code, 5);
    assert_eq!(payload["error"], "FEEDBACK_SINGULAR");
    assert!(!dir.path().join("bad.csv").exists());
    assert!(!dir.path().join("bad.csv.manifest.json").exists());
}

#[test]
fn bootstrap_report_has_intervals_for_iv_only() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path(), "d.csv", 3000);
    ok(dir.path(), &["estimate", "--input", "d.csv", "--out", "r.json", "--bootstrap", "200"]);
    let r = json(&dir.path().join("r.json"));
    let blocks = r["estimates"].as_array().unwrap();
    assert_eq!(blocks.len(), 2);
    let numbers = blocks.iter().flat_map(|b| [&b["beta_xy"], &b["beta_yx"]]).filter(|v| v.is_f64()).count();
    assert_eq!(numbers, 4);
    let intervals = blocks.iter().flat_map(|b| [&b["ci_xy"], &b["ci_yx"]]).filter(|v| v.is_array()).count();
    assert_eq!(intervals, 2);
    assert_eq!(blocks[0]["label"], "IV");
    assert_eq!(blocks[0]["se_source"], "bootstrap");
    assert_eq!(blocks[0]["bootstrap"]["replicates"], 200);
    assert_eq!(blocks[1]["alias"], "GLS");
    assert!(dir.path().join("r.json.manifest.json").exists());
}

#[test]
fn naive_method_reports_one_block() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path(), "d.csv", 2000);
    ok(dir.path(), &["estimate", "--input", "d.csv", "--out", "r.json", "--method", "naive"]);
    let r = json(&dir.path().join("r.json"));
    let blocks = r["estimates"].as_array().unwrap();
    assert_eq!(blocks.len(), 1);
    assert_eq!(blocks[0]["label"], "Naive");
    assert_eq!(blocks[0]["se_source"], "model");
}

#[test]
fn naive_bootstrap_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path(), "d.csv", 500);
    let (code, _) = failure(dir.path(), &["estimate", "--input", "d.csv", "--method", "naive", "--bootstrap", "50"]);
    assert_eq!(code, 2);
}

#[test]
fn single_replicate_bootstrap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path(), "d.csv", 500);
    let (code, payload) = failure(dir.path(), &["bootstrap", "--input", "d.csv", "--out", "b.json", "--bootstrap", "1"]);
    assert_eq!(code, 5);
    assert_eq!(payload["error"], "INVALID_PARAMETER");
}

#[test]
fn tiny_samples_exceed_the_failure_budget() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--out", "tiny.csv", "--n", "40", "--seed", "3"]);
    let (code, payload) = failure(dir.path(), &["estimate", "--input", "tiny.csv", "--method", "iv", "--bootstrap", "100"]);
    assert_eq!(code, 8);
    assert_eq!(payload["error"], "EXCESSIVE_FAILURE_RATE");
}

#[test]
fn constant_outcome_is_separation() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = (0..50).map(|i| format!("1,{},{},{}\n", i % 2, (i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
    std::fs::write(dir.path().join("c.csv"), format!("x,y,z,w\n{rows}")).unwrap();
    let (code, payload) = failure(dir.path(), &["estimate", "--input", "c.csv"]);
    assert_eq!(code, 6);
    assert_eq!(payload["error"], "SEPARATION_DETECTED");
}

#[test]
fn exit_codes_follow_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("labels.csv"), "x,y,z,w\nYes,0,0.1,0.2\nNo,1,0.3,0.4\n").unwrap();
    std::fs::write(d.join("nocol.csv"), "x,y,z\n1,0,0.1\n").unwrap();
    std::fs::write(d.join("bad.json"), "{ not json").unwrap();
    simulated(d, "d.csv", 1000);

    let cases: [(&[&str], i32, &str); 6] = [
        (&["estimate", "--input", "missing.csv"], 3, "IO_ERROR"),
        (&["estimate", "--config", "bad.json"], 3, "PARSE_ERROR"),
        (&["estimate", "--input", "labels.csv"], 4, "UNMAPPED_LITERAL"),
        (&["estimate", "--input", "nocol.csv"], 4, "MISSING_COLUMN"),
        (&["estimate", "--input", "d.csv", "--solver", "prop3", "--gamma1", "0.1", "--gamma2", "0.9"], 5, "INFEASIBLE_CONFOUNDER_STRUCTURE"),
        (&["estimate", "--input", "d.csv", "--method", "naive", "--delta"], 2, "USAGE_ERROR"),
    ];
    for (args, code, name) in cases {
        let (got, payload) = failure(d, args);
        assert_eq!((got, payload["error"].as_str().unwrap()), (code, name), "{args:?}");
    }
}

#[test]
fn case_one_sweep_has_seventeen_rows() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path(), "d.csv", 2000);
    ok(dir.path(), &["sweep", "--input", "d.csv", "--out", "s.csv", "--solver", "cor1", "--grid", "eta0=-0.16:0.16:0.02"]);
    let rows = sweep_rows(&dir.path().join("s.csv"));
    assert_eq!(rows.len(), 17);
    assert_eq!(&rows[0][2], &format!("{:.16e}", -0.16));
    assert_eq!(&rows[16][2], &format!("{:.16e}", 0.16));
}

#[test]
fn baseline_cell_matches_the_estimate() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path(), "d.csv", 3000);
    ok(dir.path(), &["sweep", "--input", "d.csv", "--out", "s.csv", "--solver", "prop3", "--grid", "gamma1=1:1:0.1", "--grid", "gamma2=0:0:0.1"]);
    ok(dir.path(), &["estimate", "--input", "d.csv", "--out", "r.json", "--method", "iv", "--solver", "prop3"]);
    let rows = sweep_rows(&dir.path().join("s.csv"));
    assert_eq!(rows.len(), 1);
    let r = json(&dir.path().join("r.json"));
    let iv = &r["estimates"][0];
    for (col, key) in [(4, "beta_xy"), (5, "beta_yx")] {
        let swept: f64 = rows[0][col].parse().unwrap();
        assert_eq!(swept, iv[key].as_f64().unwrap(), "{key}");
    }
}

#[test]
fn replay_reproduces_the_simulation() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path(), "d.csv", 800);
    let first = std::fs::read(dir.path().join("d.csv")).unwrap();
    std::fs::remove_file(dir.path().join("d.csv")).unwrap();
    ok(dir.path(), &["replay", "d.csv.manifest.json"]);
    assert_eq!(std::fs::read(dir.path().join("d.csv")).unwrap(), first);
}
