use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qnash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnash"))
        .args(args)
        .env_remove("QNASH_THREADS")
        .output()
        .expect("binary runs")
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const PENNIES: &str = r#"{"format": 1, "tables": [[[1, -1], [-1, 1]], [[-1, 1], [1, -1]]]}"#;
const DILEMMA: &str = r#"{"format": 1, "tables": [[[3, 0], [5, 1]], [[3, 5], [0, 1]]]}"#;
const UNIFORM: &str = r#"{"strategies": [[[0.5, 0], [0, 0.5]], [[0.5, 0], [0, 0.5]]]}"#;
const PURE: &str = r#"{"strategies": [[[1, 0], [0, 0]], [[1, 0], [0, 0]]]}"#;

#[test]
fn certify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let game = write(&dir, "mp.json", PENNIES);
    let uniform = write(&dir, "u.json", UNIFORM);
    let pure = write(&dir, "p.json", PURE);

    let o = qnash(&["certify", "--game", s(&game), "--profile", s(&uniform), "--epsilon", "0.01"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_out(&o)["valid"], Value::Bool(true));

    let o = qnash(&["certify", "--game", s(&game), "--profile", s(&pure), "--epsilon", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    let gaps = json_out(&o)["gaps"].clone();
    assert!((gaps[1].as_f64().unwrap() - 2.0).abs() < 1e-9);

    let bad = write(&dir, "bad.json", "{\"tables\": [[[1, 2],");
    let o = qnash(&["certify", "--game", s(&bad), "--profile", s(&uniform)]);
    assert_eq!(o.status.code(), Some(2));

    let wrong = write(&dir, "w.json", r#"{"strategies": [[[1]], [[0.5, 0], [0, 0.5]]]}"#);
    let o = qnash(&["certify", "--game", s(&game), "--profile", s(&wrong)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn solve_gain_examples() {
    let dir = TempDir::new().unwrap();
    let pd = write(&dir, "pd.json", DILEMMA);
    let profile = dir.path().join("profile.json");
    let o = qnash(&["solve-gain", "--game", s(&pd), "--profile-out", s(&profile)]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&profile).unwrap()).unwrap();
    for k in 0..2 {
        assert!(v["strategies"][k][1][1].as_f64().unwrap() >= 0.99);
    }

    let mp = write(&dir, "mp.json", PENNIES);
    let o = qnash(&["solve-gain", "--game", s(&mp)]);
    assert_eq!(o.status.code(), Some(0));
    let report = json_out(&o);
    assert!(report["residual"].as_f64().unwrap() <= 1e-6);
    assert!(report["certificate"]["gaps"].as_array().unwrap().iter().all(|g| g.as_f64().unwrap() <= 1e-3));

    let one = write(&dir, "one.json", r#"{"tables": [[7]]}"#);
    let o = qnash(&["solve-gain", "--game", s(&one)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_out(&o)["iterations"], Value::from(0));
}

#[test]
fn solve_gain_budget_exhaustion_still_reports() {
    let dir = TempDir::new().unwrap();
    let pd = write(&dir, "pd.json", DILEMMA);
    let out = dir.path().join("report.json");
    // the uniform start is far from defect/defect
    let o = qnash(&["solve-gain", "--game", s(&pd), "--max-iter", "1", "--tol", "1e-12", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(4));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["converged"], Value::Bool(false));
}

#[test]
fn solve_gain_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let g = write(
        &dir,
        "g.json",
        r#"{"tables": [[[2, -1, 0], [0, 1, -2], [1, 0, 1]], [[-2, 1, 0], [0, -1, 2], [-1, 0, -1]]]}"#,
    );
    let a = qnash(&["solve-gain", "--game", s(&g), "--seed", "7", "--max-iter", "300"]);
    let b = qnash(&["solve-gain", "--game", s(&g), "--seed", "7", "--max-iter", "300"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), b.status.code());
}

#[test]
fn best_response_and_project() {
    let dir = TempDir::new().unwrap();
    let mp = write(&dir, "mp.json", PENNIES);
    let pure = write(&dir, "p.json", PURE);
    let o = qnash(&["best-response", "--game", s(&mp), "--profile", s(&pure), "--player", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((v["gap"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    let o = qnash(&["best-response", "--game", s(&mp), "--profile", s(&pure), "--player", "2"]);
    assert_eq!(o.status.code(), Some(3));

    let m = write(&dir, "m.json", r#"[[1, 0, 0, 0], [0, -1, 0, 0], [0, 0, 2, [0, 1]], [0, 0, [0, -1], 0.5]]"#);
    let o = qnash(&["project", "--matrix", s(&m), "--in-dims", "2", "--out-dims", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert_eq!(v["passes"], Value::Bool(true));
    let o = qnash(&["project", "--matrix", s(&m), "--in-dims", "3", "--out-dims", "2"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn wigner_commands() {
    let dir = TempDir::new().unwrap();
    let third = 1.0 / 3.0;
    let m = write(&dir, "m.json", &format!("[[{third}, 0, 0], [0, {third}, 0], [0, 0, {third}]]"));
    let o = qnash(&["wigner", "psi", "--matrix", s(&m)]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o)["vector"].clone();
    let v = v.as_array().unwrap();
    assert_eq!(v.len(), 9);
    assert!(v.iter().all(|x| (x.as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-15));

    let o = qnash(&["wigner", "roundtrip", "--n", "5", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(json_out(&o)["max_deviation"].as_f64().unwrap() <= 1e-9);

    let o = qnash(&["wigner", "inv", "--vertex", "0", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert!(v["min_eigenvalue"].as_f64().unwrap() < 0.0);
    assert_eq!(v["is_density"], Value::Bool(false));

    let even = write(&dir, "e.json", "[[0.5, 0], [0, 0.5]]");
    assert_eq!(qnash(&["wigner", "psi", "--matrix", s(&even)]).status.code(), Some(3));
    assert_eq!(qnash(&["wigner", "roundtrip", "--n", "4"]).status.code(), Some(3));
}

#[test]
fn wigner_output_is_bit_stable() {
    let a = qnash(&["wigner", "roundtrip", "--n", "7", "--seed", "11"]);
    let b = qnash(&["wigner", "roundtrip", "--n", "7", "--seed", "11"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn fixpoint_rotate_matches_level_zero() {
    let o = qnash(&["fixpoint", "--n", "3", "--r", "1", "--f", "rotate"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert!(v["fixed_point"]["residual"].as_f64().unwrap() <= 1e-9);
    assert!(v["diameter_bound"].is_number());
    let p1: Vec<f64> = serde_json::from_value(v["fixed_point"]["point"].clone()).unwrap();

    // at level 0 the approximation of a linear map is the map itself
    let o = qnash(&["fixpoint", "--n", "3", "--r", "0", "--f", "rotate"]);
    assert_eq!(o.status.code(), Some(0));
    let p0: Vec<f64> = serde_json::from_value(json_out(&o)["fixed_point"]["point"].clone()).unwrap();
    for (a, b) in p1.iter().zip(&p0) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn fixpoint_linear_map_and_thread_independence() {
    let dir = TempDir::new().unwrap();
    let map = write(&dir, "a.json", r#"{"matrix": [[0.5, 0.2, 0.0], [0.5, 0.3, 0.6], [0.0, 0.5, 0.4]]}"#);
    let one = qnash(&["fixpoint", "--n", "3", "--r", "2", "--f", "linear", "--map", s(&map), "--threads", "1"]);
    let four = qnash(&["fixpoint", "--n", "3", "--r", "2", "--f", "linear", "--map", s(&map), "--threads", "4"]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    let bad = write(&dir, "b.json", r#"{"matrix": [[0.5, 0.2, 0.0], [0.5, 0.3, 0.6], [0.0, 0.6, 0.4]]}"#);
    assert_eq!(qnash(&["fixpoint", "--n", "3", "--f", "linear", "--map", s(&bad)]).status.code(), Some(2));
}

#[test]
fn fixpoint_budget_refusal() {
    let o = qnash(&["fixpoint", "--n", "4", "--r", "3", "--budget", "1000"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(o.stdout.is_empty());
}

#[test]
fn reduce_examples() {
    let o = qnash(&["reduce", "--problem", "const-mixed", "--n", "3", "--r", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert!(v["distance_to_maximally_mixed"].as_f64().unwrap() <= 1e-6);
    assert!(v["pipeline"]["diameter_bound"].is_number());
    assert_eq!(v["pipeline"]["consistent"], Value::Bool(true));

    let o = qnash(&["reduce", "--problem", "identity", "--n", "4", "--r", "3"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn no_partial_output_on_error() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("never.json");
    let o = qnash(&["reduce", "--problem", "identity", "--n", "4", "--r", "3", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(5));
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn solve_reduction_routes() {
    let dir = TempDir::new().unwrap();
    let single = write(&dir, "s.json", r#"{"signatures": [{"in_dims": [1], "out_dims": [2]}], "payoffs": [[[1, 0], [0, 0]]]}"#);
    let o = qnash(&["solve-reduction", "--game", s(&single), "--epsilon", "0.3"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_out(&o);
    assert_eq!(v["route"], Value::from("reduction"));
    assert!(v["achieved_epsilon"].as_f64().unwrap() <= 0.3);

    let mp = write(&dir, "mp.json", PENNIES);
    let o = qnash(&["solve-reduction", "--game", s(&mp), "--epsilon", "1e-3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_out(&o)["route"], Value::from("gain_fallback"));
    let o = qnash(&["solve-reduction", "--game", s(&mp), "--epsilon", "1e-3", "--no-fallback"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn invalid_tolerance_is_rejected() {
    let o = qnash(&["fixpoint", "--n", "3", "--tol", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}
