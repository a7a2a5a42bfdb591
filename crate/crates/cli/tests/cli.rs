use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BINARY: &str = r#"
  "measure": {
    "alphabet": { "kind": "finite", "labels": [0, 1] },
    "backend": { "backend": "exact", "weights": [0.5, 0.5] }
  }"#;

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format!("{{{BINARY},\n{body}\n}}")).unwrap();
    path
}

fn run(command: &str, config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ruelle"))
        .args([command, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn eigen_of_zero_potential_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "zero.json", r#""potential": { "family": "constant", "c": 0.0 }, "solver": { "depth": 5 }"#);
    let out = dir.path().join("out");
    let res = run("eigen", &cfg, &out);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["command"], "eigen");
    assert!((m["results"]["triple"]["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    for file in ["eigenfunction.csv", "conformal_measure.csv", "history.csv", "spectral_gap.csv"] {
        assert!(out.join(file).exists(), "{file} missing");
    }
    let gap = std::fs::read_to_string(out.join("spectral_gap.csv")).unwrap();
    assert!(gap.starts_with("n,error\n"));
}

#[test]
fn pressure_of_first_coordinate_potential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "fc.json",
        r#""potential": { "family": "first_coordinate", "table": [0.0, 1.0986122886681098] }, "solver": { "depth": 4 }"#,
    );
    let out = dir.path().join("out");
    assert!(run("pressure", &cfg, &out).status.success());
    let p = manifest(&out)["results"]["pressure"].as_f64().unwrap();
    assert!((p - 2f64.ln()).abs() < 1e-9);
    let csv = std::fs::read_to_string(out.join("pressure.csv")).unwrap();
    assert!(csv.starts_with("log_lambda,lambda,eigen_residual,conformality_residual\n"));
}

#[test]
fn invalid_tolerance_exits_two_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "bad.json",
        r#""potential": { "family": "constant", "c": 0.0 }, "solver": { "depth": 4, "tol": -1.0 }"#,
    );
    let out = dir.path().join("out");
    let res = run("eigen", &cfg, &out);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&res.stderr).contains("tol"));
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let unknown = config(dir.path(), "unknown.json", r#""potential": { "family": "constant", "c": 0.0 }, "solvr": {}"#);
    assert_eq!(run("eigen", &unknown, &out).status.code(), Some(2));
    let weights = dir.path().join("weights.json");
    std::fs::write(
        &weights,
        r#"{"measure": {"alphabet": {"kind": "finite", "labels": [0, 1]},
            "backend": {"backend": "exact", "weights": [0.5, 0.6]}},
            "potential": {"family": "constant", "c": 0.0}}"#,
    )
    .unwrap();
    assert_eq!(run("pressure", &weights, &out).status.code(), Some(2));
    let short = config(dir.path(), "short.json", r#""potential": { "family": "first_coordinate", "table": [0.0] }"#);
    assert_eq!(run("pressure", &short, &out).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(run("pressure", &missing, &out).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn convergence_failure_exits_three_with_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "slow.json",
        r#""potential": { "family": "two_coordinate", "table": [[0.0, 0.6931471805599453], [1.0986122886681098, 0.0]] },
           "solver": { "depth": 5, "max_iter": 2 }"#,
    );
    let out = dir.path().join("out");
    let res = run("eigen", &cfg, &out);
    assert_eq!(res.status.code(), Some(3));
    let m = manifest(&out);
    assert_eq!(m["status"], "convergence_failure");
    let history = std::fs::read_to_string(out.join("residual_history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("iteration,bracket_width"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn seed_flag_overrides_config_and_changes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "sim.json",
        r#""potential": { "family": "constant", "c": 0.0 }, "solver": { "depth": 3 }, "seed": 1, "params": { "steps": 200 }"#,
    );
    let trace = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let res = Command::new(env!("CARGO_BIN_EXE_ruelle"))
            .args(["markov-sim", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(res.status.success());
        assert_eq!(manifest(&out)["config"]["seed"].as_u64(), Some(seed.parse().unwrap()));
        std::fs::read_to_string(out.join("trace.csv")).unwrap()
    };
    let (a, b, c) = (trace("5", "a"), trace("5", "b"), trace("6", "c"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.starts_with("# depth=3,nodes=2,seed=5,stream=0\nstep,word_index,word\n"));
    assert_eq!(a.lines().count(), 2 + 201);
}

#[test]
fn out_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "zero.json", r#""potential": { "family": "constant", "c": 0.0 }, "solver": { "depth": 3 }"#);
    let out = dir.path().join("env-out");
    let res = Command::new(env!("CARGO_BIN_EXE_ruelle"))
        .args(["pressure", "--config"])
        .arg(&cfg)
        .env("RUELLE_OUT_DIR", &out)
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(out.join("pressure.csv").exists());
}
