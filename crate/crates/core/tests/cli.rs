use std::path::Path;
use std::process::Command;

use kms_lab_core::config::{load_config, ConfigError, ExperimentConfig, SuiteName};
use kms_lab_core::report::read_csv;
use kms_lab_core::runner::run_suite;

fn kms_lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kms-lab"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn inequality_run_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"suite": "inequalities", "dims": [2], "trials": 10, "seed": 7}"#);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = kms_lab().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(out.join("report.csv")).unwrap());
        let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["summary"]["failed"], 0);
        assert_eq!(summary["config"]["seed"], 7);
    }
    assert_eq!(outputs[0], outputs[1]);
    let rows = read_csv(outputs[0].as_slice()).unwrap();
    assert!(rows.windows(2).all(|w| w[0].name <= w[1].name));
    assert!(rows.iter().any(|r| r.name == "holder"));
}

#[test]
fn seed_flag_changes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"suite": "modular", "dims": [3], "trials": 2, "seed": 1}"#);
    let mut outputs = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let status = kms_lab().args(["run", "--config"]).arg(&cfg).args(["--seed", seed]).arg("--out").arg(&out).status().unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(out.join("report.csv")).unwrap());
    }
    assert_ne!(outputs[0], outputs[1]);
}

#[test]
fn exponentiable_summary_reports_example1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"suite": "all", "dims": [2], "trials": 1}"#);
    let out = dir.path().join("out");
    let status =
        kms_lab().args(["run", "--config"]).arg(&cfg).args(["--suite", "exponentiable"]).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let certs = summary["certificates"].as_array().unwrap();
    let e1 = certs.iter().find(|c| c["name"] == "example1;lambda=1").unwrap();
    assert_eq!(e1["certificate"]["verdict"], "converges");
    let v = e1["certificate"]["value"].as_f64().unwrap();
    assert!((v - 17.89440031577).abs() < 1e-9);
    assert_eq!(summary["config"]["suite"], "exponentiable");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"dims": [1]}"#);
    let out = kms_lab().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dims"));

    let cfg = write_config(dir.path(), "{\"suite\": \"all\",\n \"trails\": 3}");
    let out = kms_lab().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let missing = dir.path().join("missing.json");
    assert!(matches!(load_config(&missing), Err(ConfigError::Io { .. })));
}

#[test]
fn exhausted_budget_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"suite": "expansional", "dims": [2], "trials": 2, "budget": {"max_order": 2, "tolerance": 1e-12}}"#,
    );
    let out = dir.path().join("out");
    let status = kms_lab().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let rows = read_csv(std::fs::File::open(out.join("report.csv")).unwrap()).unwrap();
    assert_eq!(rows.iter().filter(|r| r.name == "trial_error").count(), 2);
}

#[test]
fn examples_command_prints_both_generators() {
    let out = kms_lab().arg("examples").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("example1") && text.contains("example2"));
}

#[test]
fn perturbation_suite_in_process() {
    let cfg = ExperimentConfig { suite: SuiteName::Perturbation, dims: vec![2], trials: 2, seed: 5, ..Default::default() };
    let report = run_suite(&cfg).unwrap();
    assert_eq!(report.summary.failed, 0);
    let oracle = report.rows.iter().filter(|r| r.report.name == "perturbed_vector_oracle");
    assert!(oracle.clone().count() == 2 && oracle.into_iter().all(|r| r.report.lhs < 1e-6));
}
