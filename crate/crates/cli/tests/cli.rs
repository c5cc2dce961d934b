use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_extremal-fields"));
    cmd.env_remove("EXTREMAL_FIELDS_SEED");
    cmd
}

fn run_with_config(args: &[&str], config: &str, dir: &Path) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    bin().args(args).arg("--config").arg(&path).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn limit_cdf_at_zero_dependence_is_exp_minus_c() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with_config(&["limit-cdf"], r#"{"R": 0.0, "c": 1.0}"#, dir.path());
    let v = stdout_json(&out);
    let value = v["result"]["value"].as_f64().unwrap();
    assert!((value - (-1.0_f64).exp()).abs() < 1e-12, "{value}");
    assert_eq!(v["result"]["method"], "gauss_hermite");
    assert_eq!(v["config"]["quadrature"]["node_count"], 64);
}

#[test]
fn limit_cdf_from_set_parameters_and_overrides() {
    let out = bin()
        .args(["limit-cdf", "--set", "x=1", "--set", "lambda_j=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "x must be a vector");
    let dir = tempfile::tempdir().unwrap();
    let out = run_with_config(
        &["limit-cdf", "--set", "x.1=2", "--set", "R=0"],
        r#"{"x": [1.0, 1.0], "lambda_j": 0.5}"#,
        dir.path(),
    );
    let v = stdout_json(&out);
    assert!((v["result"]["value"].as_f64().unwrap() - (-1.0_f64).exp()).abs() < 1e-12);
}

#[test]
fn unbalanced_gamma_sum_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{
        "model": {"family": "separable_stable", "alphas": [2.0, 2.0]},
        "plan": {"d": 2, "k": 0, "M": [], "gammas": [0.25, 0.3],
                 "c_descriptors": [{"kind": "constant", "value": 1.0}, {"kind": "constant", "value": 1.0}]},
        "J": [[[0.0, 0.0], [1.0, 1.0]]],
        "x": [1.0, 1.0],
        "u_values": [2.0],
        "replicates": 100
    }"#;
    let out = run_with_config(&["simulate-sup"], config, dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sum to 1/2"), "{stderr}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with_config(&["limit-cdf"], r#"{"c": 1.0, "colour": 3}"#, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn budget_failures_are_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config =
        r#"{"lemma": "lemma3", "alphas": [2.0, 2.0], "u_values": [5.0], "budget": 1000, "allow_stride": false}"#;
    let out = run_with_config(&["lemma-sums"], config, dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn repeated_runs_write_identical_payloads() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"alphas": [2.0, 2.0], "u_values": [2.0, 2.5], "replicates": 200}"#;
    let cfg = dir.path().join("tail.json");
    std::fs::write(&cfg, config).unwrap();
    let mut payloads = Vec::new();
    for (i, workers) in ["1", "3"].iter().enumerate() {
        let prefix = dir.path().join(format!("run{i}"));
        let out = bin()
            .args(["tail-check", "--seed", "11", "--format", "both", "--workers", workers])
            .arg("--config")
            .arg(&cfg)
            .arg("--output")
            .arg(&prefix)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
        assert!(csv.starts_with("u,empirical,ci_low,ci_high,theory,ratio,exceedances,n\n"));
        let meta: Value =
            serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("meta.json")).unwrap()).unwrap();
        assert!(meta["timestamp_unix"].as_u64().unwrap() > 0);
        payloads.push(std::fs::read(prefix.with_extension("json")).unwrap());
    }
    assert!(payloads[0] == payloads[1], "payloads differ between worker counts");
    let v: Value = serde_json::from_slice(&payloads[0]).unwrap();
    assert_eq!(v["config"]["seed"], 11);
    assert_eq!(
        v["config"]["workers"], 0,
        "the payload records the normalized worker count"
    );
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p.json");
    std::fs::write(
        &cfg,
        r#"{"alpha": 2.0, "horizon": 2.0, "step": 0.125, "replicates": 1000}"#,
    )
    .unwrap();
    let out = bin()
        .arg("pickands")
        .arg("--config")
        .arg(&cfg)
        .env("EXTREMAL_FIELDS_SEED", "99")
        .output()
        .unwrap();
    let v = stdout_json(&out);
    assert_eq!(v["config"]["seed"], 99);
    let out = bin()
        .args(["pickands", "--seed", "5"])
        .arg("--config")
        .arg(&cfg)
        .env("EXTREMAL_FIELDS_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(stdout_json(&out)["config"]["seed"], 5);
}

#[test]
fn emitted_config_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with_config(
        &["lemma-sums"],
        r#"{"lemma": "lemma2", "alphas": [2.0, 2.0], "u_values": [3.0], "R": 0.5}"#,
        dir.path(),
    );
    let v = stdout_json(&out);
    let again = run_with_config(&["lemma-sums"], &v["config"].to_string(), dir.path());
    assert_eq!(stdout_json(&again), v);
}
