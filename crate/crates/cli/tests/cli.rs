//! End-to-end binary tests: exit codes, output determinism, file formats.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bvrk"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write_tmp(name: &str, content: &str) -> PathBuf {
    let path = tmp(name);
    fs::write(&path, content).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

const EXPERIMENT: &str = r#"{
  "cipher": {"family": "toy_em", "n": 8, "seed": 21},
  "attack": {"p": 32},
  "trials": 8,
  "master_seed": 11
}"#;

#[test]
fn recover_key_succeeds_and_is_byte_deterministic() {
    let config = write_tmp("exp.json", EXPERIMENT);
    let out_a = tmp("report_a.json");
    let out_b = tmp("report_b.json");
    let status_a = run(&[
        "recover-key",
        "--config",
        config.to_str().unwrap(),
        "--threads",
        "1",
        "--out",
        out_a.to_str().unwrap(),
    ]);
    let status_b = run(&[
        "recover-key",
        "--config",
        config.to_str().unwrap(),
        "--threads",
        "7",
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert_eq!(status_a.status.code(), Some(0));
    assert_eq!(status_b.status.code(), Some(0));
    let a = fs::read(&out_a).unwrap();
    let b = fs::read(&out_b).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "reports must be byte-identical across thread counts");
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["summary"]["successes"], 8);
}

#[test]
fn seed_flag_overrides_config() {
    let config = write_tmp("exp_seed.json", EXPERIMENT);
    let base = run(&["recover-key", "--config", config.to_str().unwrap()]);
    let overridden = run(&[
        "recover-key",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "999",
    ]);
    assert_ne!(base.stdout, overridden.stdout);
    let report: serde_json::Value = serde_json::from_slice(&overridden.stdout).unwrap();
    assert_eq!(report["config"]["master_seed"], 999);
}

#[test]
fn malformed_config_exits_2() {
    let config = write_tmp("bad.json", "{\"cipher\": }");
    let out = run(&["recover-key", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_config_field_exits_2() {
    let config = write_tmp(
        "unknown_field.json",
        r#"{"cipher": {"family": "toy_em", "n": 8}, "trials": 1, "surprise": true}"#,
    );
    let out = run(&["recover-key", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cap_exceeded_exits_3() {
    let config = write_tmp(
        "cap.json",
        r#"{
          "cipher": {"family": "toy_em", "n": 6, "seed": 2},
          "attack": {"p": 1, "enum_cap": 1, "retry_limit": 0},
          "trials": 1,
          "master_seed": 5
        }"#,
    );
    let out = run(&["recover-key", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn equivalent_keys_exit_1() {
    // Identity public permutation: every key induces the same permutation,
    // so verification cannot separate the survivors.
    let config = write_tmp(
        "ambig.json",
        r#"{
          "cipher": {"family": "toy_em", "n": 4, "identity_perm": true},
          "attack": {"p": 4},
          "trials": 1,
          "master_seed": 1
        }"#,
    );
    let out = run(&["recover-key", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["ambiguous"], 1);
}

#[test]
fn find_struct_reports_containment() {
    let config = write_tmp("fs.json", EXPERIMENT);
    let out = run(&["find-struct", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["schema"], "bvrk.find-struct-report.v1");
    assert_eq!(report["summary"]["containment_failures"], 0);
}

#[test]
fn analyze_table_file_reports_known_bias() {
    // AND of two bits: n=1 truth table 0001 -> stream bits 0,0,0,1 -> 0x08.
    let table = write_tmp("and.json", r#"{"k": 2, "n": 1, "table_hex": "08"}"#);
    let out = run(&[
        "analyze",
        "--table",
        table.to_str().unwrap(),
        "--sigma",
        "3/5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["delta_f64"], 0.5);
    assert_eq!(report["structure_total"], 1);
    assert_eq!(report["sigma_close"][0]["per_component_counts"][0], 4);
}

#[test]
fn analyze_cipher_spec_reports_derived_function() {
    let spec = write_tmp("cipher.json", r#"{"family": "toy_em", "n": 8, "seed": 4}"#);
    let out = run(&[
        "analyze",
        "--config",
        spec.to_str().unwrap(),
        "--key",
        "0x5a",
        "--plaintext",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["input_width"], 8);
    // The hidden period makes 0 and s structures with tag 0.
    assert_eq!(report["structures"][0]["count"], 2);
}

#[test]
fn analyze_requires_exactly_one_input() {
    let out = run(&["analyze"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_emits_csv_and_json() {
    let config = write_tmp(
        "sweep.json",
        r#"{
          "base": {
            "cipher": {"family": "toy_em", "n": 8, "seed": 21},
            "trials": 4,
            "master_seed": 11
          },
          "grid_p": [8, 16]
        }"#,
    );
    let csv_out = run(&["sweep", "--config", config.to_str().unwrap()]);
    assert_eq!(csv_out.status.code(), Some(0));
    let text = String::from_utf8(csv_out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("family,k,n,p,"));
    assert_eq!(lines.count(), 2);

    let json_out = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "json",
    ]);
    let report: serde_json::Value = serde_json::from_slice(&json_out.stdout).unwrap();
    assert_eq!(report["schema"], "bvrk.sweep-report.v1");
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn recovery_rejects_csv_format() {
    let config = write_tmp("exp_csv.json", EXPERIMENT);
    let out = run(&[
        "recover-key",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_runs_and_emits_json() {
    let out = run(&["bench"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["schema"], "bvrk.bench.v1");
    assert!(!report["entries"].as_array().unwrap().is_empty());
}
