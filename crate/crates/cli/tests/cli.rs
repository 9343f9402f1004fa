//! Binary-level tests: argument handling, exit codes, and artifact layout.

use std::path::Path;
use std::process::{Command, Output};

use rpod_cli::{ExperimentConfig, StepSet};

fn rpod_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rpod"))
}

fn synthetic_config(rpod_block: &str) -> String {
    format!(
        r#"{{
            "problem": {{
                "type": "synthetic",
                "n": 12,
                "dominant": [[0.9, 0.0], [0.7, 0.0], [0.5, 0.0]],
                "tail_magnitude": 1e-8,
                "inputs": 4,
                "outputs": 4,
                "seed": 5
            }},
            "snapshots": {{
                "primal_steps": {{"start": 1, "count": 5}},
                "adjoint_steps": {{"start": 1, "count": 5}}
            }},
            "method": {rpod_block},
            "order": 3,
            "evaluation": {{"excitation": "impulse", "steps": 30}}
        }}"#
    )
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn run_with(args: &[&str]) -> Output {
    rpod_bin().args(args).output().expect("binary runs")
}

#[test]
fn successful_run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &synthetic_config(r#"{"bpod": true, "rpod": {"r": 2, "s": 2, "m1": 3, "m2": 3, "seed": 7}}"#),
    );
    let out = dir.path().join("artifacts");
    let result = run_with(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    for rel in ["manifest.json", "cost.csv", "eigenvalues.csv", "summary.json"] {
        assert!(out.join(rel).exists(), "missing {rel}");
    }
    assert!(!out.with_file_name("artifacts.staging").exists());
}

#[test]
fn config_error_names_field_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // r exceeds the 4 inputs.
    let cfg = write_config(
        dir.path(),
        &synthetic_config(r#"{"rpod": {"r": 9, "s": 2, "m1": 3, "m2": 3, "seed": 7}}"#),
    );
    let out = dir.path().join("artifacts");
    let result = run_with(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("method.rpod.r"), "stderr was: {stderr}");
    assert!(!out.exists(), "failed run must leave no artifacts");
}

#[test]
fn unknown_keys_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let body = synthetic_config(r#"{"bpod": true}"#).replace("\"order\": 3", "\"order\": 3, \"bogus_knob\": 1");
    let cfg = write_config(dir.path(), &body);
    let result = run_with(&["run", "--config", cfg.to_str().unwrap(), "--out", "/tmp/never"]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("bogus_knob"));
}

#[test]
fn rank_shortfall_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // Order 3 but the sampled budget only supports rank 2.
    let body = synthetic_config(r#"{"rpod": {"r": 1, "s": 1, "m1": 2, "m2": 2, "seed": 7}}"#);
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("artifacts");
    let result = run_with(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(4));
    assert!(!out.exists());
}

#[test]
fn env_var_supplies_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &synthetic_config(r#"{"bpod": true}"#));
    let out = dir.path().join("from-env");
    let result = rpod_bin()
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env("RPOD_OUT", &out)
        .output()
        .unwrap();
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    assert!(out.join("manifest.json").exists());
}

#[test]
fn seed_override_changes_selection() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &synthetic_config(r#"{"rpod": {"r": 2, "s": 2, "m1": 3, "m2": 3, "seed": 7}}"#),
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert!(run_with(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", out_a.to_str().unwrap()
    ])
    .status
    .success());
    assert!(run_with(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", out_b.to_str().unwrap(),
        "--seed-override", "31"
    ])
    .status
    .success());
    let sel_a = std::fs::read_to_string(out_a.join("rpod/selection.json")).unwrap();
    let sel_b = std::fs::read_to_string(out_b.join("rpod/selection.json")).unwrap();
    assert_ne!(sel_a, sel_b);
    assert!(sel_b.contains("\"seed\": 31"));
}

#[test]
fn repeated_runs_emit_consistency_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &synthetic_config(r#"{"rpod": {"r": 2, "s": 2, "m1": 3, "m2": 3, "seed": 7, "k": 3}}"#),
    );
    let out = dir.path().join("artifacts");
    assert!(run_with(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()
    ])
    .status
    .success());
    let report = std::fs::read_to_string(out.join("rpod/consistency.json")).unwrap();
    assert!(report.contains("\"max_distance\""));
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(parsed["runs"].as_array().unwrap().len(), 3);
    assert_eq!(parsed["unstable"], serde_json::Value::Bool(false));
}

#[test]
fn matrix_files_problem_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    // A 3-state diagonal system provided as text matrices.
    std::fs::write(dir.path().join("a.txt"), "3 3\n9e-1 0 0\n0 5e-1 0\n0 0 1e-1\n").unwrap();
    std::fs::write(dir.path().join("b.txt"), "3 1\n1e0\n1e0\n1e0\n").unwrap();
    std::fs::write(dir.path().join("c.txt"), "1 3\n1e0 1e0 1e0\n").unwrap();
    let body = format!(
        r#"{{
            "problem": {{
                "type": "matrix_files",
                "a": "{0}/a.txt",
                "b": "{0}/b.txt",
                "c": "{0}/c.txt"
            }},
            "snapshots": {{
                "primal_steps": [0, 1, 2, 3],
                "adjoint_steps": [0, 1, 2, 3]
            }},
            "method": {{"bpod": true, "rpod": {{"r": 1, "s": 1, "m1": 4, "m2": 4, "seed": 3}}}},
            "order": 3,
            "evaluation": {{"excitation": "impulse", "steps": 20}}
        }}"#,
        dir.path().display()
    );
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("artifacts");
    let result = run_with(&[
        "run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()
    ]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    // Diagonal ground truth shows up in the extracted spectrum.
    let inspect = run_with(&["inspect", out.join("rpod/rom").to_str().unwrap()]);
    assert!(inspect.status.success());
    let text = String::from_utf8_lossy(&inspect.stdout);
    assert!(text.contains("modal rom: order 3"));
    assert!(text.contains("9e-1") || text.contains("8.9999"), "{text}");
}

#[test]
fn bounds_subcommand_formats_csv() {
    let result = run_with(&["bounds", "--l", "5", "--eps", "1", "--beta", "0.05", "--k", "2"]);
    assert!(result.status.success());
    let text = String::from_utf8_lossy(&result.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("l,eps,beta,m,gamma,gamma_k"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("5,1,0.05,5,"), "row: {row}");

    // gamma^k column for beta = 0.1, k = 2.
    let result = run_with(&["bounds", "--l", "4", "--eps", "0.5", "--beta", "0.1", "--k", "2"]);
    let text = String::from_utf8_lossy(&result.stdout);
    let row = text.lines().nth(1).unwrap();
    let gamma_k: f64 = row.split(',').last().unwrap().parse().unwrap();
    assert!((gamma_k - 0.0361).abs() <= 1e-15, "gamma_k {gamma_k}");

    // Empty lists produce a header-only table.
    let result = run_with(&["bounds", "--k", "1"]);
    assert!(result.status.success());
    assert_eq!(String::from_utf8_lossy(&result.stdout), "l,eps,beta,m,gamma,gamma_k\n");
}

#[test]
fn step_set_materialization() {
    let list = StepSet::List(vec![1, 4, 9]);
    assert_eq!(list.materialize().unwrap(), vec![1, 4, 9]);
    let range = StepSet::Range { start: 2, count: 4, stride: 3 };
    assert_eq!(range.materialize().unwrap(), vec![2, 5, 8, 11]);
    assert!(StepSet::List(vec![3, 3]).materialize().is_err());
}

#[test]
fn effective_config_echoes_defaults() {
    let cfg = ExperimentConfig::from_json(&synthetic_config(r#"{"bpod": true}"#)).unwrap();
    let echoed = serde_json::to_value(&cfg).unwrap();
    assert_eq!(echoed["rank_tol"], serde_json::json!(1e-8));
    assert_eq!(echoed["evaluation"]["noise_count"], serde_json::json!(20));
    assert_eq!(echoed["discard_unstable"], serde_json::json!(false));
}
