use std::process::{Command, Output};

use num_complex::Complex64;
use wvn_spectral::operator_data::{Envelope, OperatorData, WvnTerm};

fn wvn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wvn")).args(args).output().expect("spawn wvn")
}

fn data_file(dir: &tempfile::TempDir, data: &OperatorData) -> String {
    let p = dir.path().join("data.json");
    std::fs::write(&p, data.to_json().unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn two_term() -> OperatorData {
    OperatorData::new(
        3,
        vec![
            WvnTerm::new(Complex64::new(0.8, -0.3), 1.3, Envelope::power_law(0.6, 1.0)),
            WvnTerm::new(Complex64::new(-0.5, 0.6), -2.1, Envelope::power_law(0.6, 1.0)),
        ],
    )
}

#[test]
fn sp_lists_points() {
    let out = wvn(&["--quiet", "sp", "--phi", "1,2", "--p", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let es: Vec<f64> = v["points"].as_array().unwrap().iter().map(|p| p["E"].as_f64().unwrap()).collect();
    assert_eq!(es, vec![0.0, 0.5, 1.0, 1.5]);
    assert_eq!(v["p"], 5);
}

#[test]
fn dimension_prints_bound() {
    let out = wvn(&["--quiet", "dimension", "--p", "5", "--alpha", "0.2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "0.6\n");
}

#[test]
fn recursion_check_exit_codes() {
    let out = wvn(&["--quiet", "recursion-check", "--max-I", "5", "--trials", "100", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    let again = wvn(&["--quiet", "recursion-check", "--max-I", "5", "--trials", "100", "--seed", "7"]);
    assert_eq!(out.stdout, again.stdout);
    assert_eq!(wvn(&["recursion-check", "--max-I", "10"]).status.code(), Some(3));
}

#[test]
fn usage_errors() {
    assert_eq!(wvn(&["bogus"]).status.code(), Some(3));
    assert_eq!(wvn(&["simulate"]).status.code(), Some(3));
    assert_eq!(wvn(&["dimension", "--p", "4", "--alpha", "0.2"]).status.code(), Some(3));
    assert_eq!(wvn(&["--help"]).status.code(), Some(0));
}

#[test]
fn validate_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let good = data_file(&dir, &two_term());
    assert_eq!(wvn(&["--quiet", "validate", "--config", &good]).status.code(), Some(0));

    let mut bad = two_term();
    bad.p = 4;
    let bad = data_file(&dir, &bad);
    let out = wvn(&["--quiet", "validate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!v["violations"].as_array().unwrap().is_empty());
}

#[test]
fn simulate_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data_file(&dir, &two_term());
    let out = dir.path().join("traj.csv");
    let code = wvn(&[
        "--quiet", "simulate", "--config", &cfg, "--eta", "0.4", "--xmax", "200", "--out", out.to_str().unwrap(),
    ])
    .status
    .code();
    assert_eq!(code, Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("x,theta,log_r\n"));
    assert_eq!(csv.lines().count(), 401);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("traj.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn example_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ex");
    let code = wvn(&["--quiet", "example", "--branch", "decay", "--xmax", "2000", "--out", out.to_str().unwrap()])
        .status
        .code();
    assert_eq!(code, Some(0));
    for f in ["spec.json", "trajectory_decay.csv", "fit_decay.json", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(!out.join("fit_growth.json").exists());
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("fit_decay.json")).unwrap()).unwrap();
    assert!(fit["fitted_B"].as_f64().unwrap() > 2.0);
}

#[test]
fn infeasible_example_is_a_validation_failure() {
    assert_eq!(wvn(&["--quiet", "example", "--amods", "1,0.5"]).status.code(), Some(1));
}

#[test]
fn divisors_report_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data_file(&dir, &two_term());
    let out = wvn(&["--quiet", "divisors", "--config", &cfg, "--eta-grid", "0:2:5", "--trunc", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 5);
    assert_eq!(list[0]["reports"][0]["I"], 1);
    let too_long = wvn(&["--quiet", "divisors", "--config", &cfg, "--eta-grid", "0", "--trunc", "3"]);
    assert_eq!(too_long.status.code(), Some(3));
}
