use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn permlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permlab"))
        .args(args)
        .env_remove("PERMLAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = permlab(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(path: &Path, text: &str) -> String {
    fs::write(path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn exact_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(&dir.path().join("a.pmat"), "3\n111\n111\n111\n");
    let v = ok_json(&["exact", &file]);
    assert_eq!(v["permanent"], "6");
    assert_eq!(v["schema_version"], 1);
    let v = ok_json(&["exact", &file, "--method", "naive"]);
    assert_eq!(v["permanent"], "6");
}

#[test]
fn bad_matrix_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(&dir.path().join("bad.pmat"), "2\n10\n12\n");
    let out = permlab(&["exact", &file]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn params_and_feasibility() {
    let v = ok_json(&["params", "--n", "4", "--epsilon", "0.5"]);
    assert_eq!(v["total_steps"], "3932754162118");
    assert_eq!(v["samples_phase"], 259_304);
    assert_eq!(v["state_space_size"], "408");

    let v = ok_json(&["feasibility", "--n", "68"]);
    assert_eq!(v["total_steps"], "13285251197747730326655");
    assert!(v["projected_years"].as_f64().unwrap() > 420_984.0);
    assert!(v["ratio"].as_f64().unwrap() < 1.0);

    let out = permlab(&["crossover", "--epsilon", "0.5"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "68");
}

#[test]
fn estimate_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(&dir.path().join("m.pmat"), "4\n1101\n0111\n1011\n1110\n");
    let args = [
        "estimate",
        &file,
        "--relax",
        "1,262144,16,64",
        "--seed",
        "3",
    ];
    let mut a = ok_json(&args);
    let mut b = ok_json(&args);
    for v in [&mut a, &mut b] {
        v.as_object_mut().unwrap().remove("wall_seconds");
    }
    assert_eq!(a, b);
    assert_eq!(a["rng"], "chacha8");
    assert!(a["value"].as_f64().unwrap() > 0.0);
    let out = permlab(&args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("phase 1/24"), "{stderr}");
}

#[test]
fn zero_matrix_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(&dir.path().join("z.pmat"), "4\n0000\n0000\n0000\n0000\n");
    let v = ok_json(&["estimate", &file, "--quiet"]);
    assert_eq!(v["value"], 0.0);
    assert_eq!(v["steps_taken"], "0");
}

#[test]
fn gen_trials_report() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    let out = permlab(&[
        "gen",
        "--sizes",
        "4",
        "--densities",
        "7/8",
        "--count",
        "2",
        "--seed",
        "1",
        "--out",
        suite.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let config = write(
        &dir.path().join("plans.json"),
        r#"{"plans": [{"label": "fast", "epsilon": 0.5, "seed": 4,
            "relax": {"r_s_phase": 16, "r_t_phase": 1048576, "r_s_final": 64, "r_t_final": 4096}}]}"#,
    );
    let results = dir.path().join("results.jsonl");
    let csv = dir.path().join("results.csv");
    let out = permlab(&[
        "trials",
        suite.join("manifest.json").to_str().unwrap(),
        &config,
        "--workers",
        "2",
        "--out",
        results.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(fs::read_to_string(&results).unwrap().lines().count(), 2);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 3);

    let v = ok_json(&["report", results.to_str().unwrap(), "--format", "json"]);
    assert_eq!(v["rows"][0]["n"], 4);
    assert_eq!(v["rows"][0]["trials"], 2);
    let table = permlab(&["report", results.to_str().unwrap(), "--group-by", "label"]);
    assert!(String::from_utf8_lossy(&table.stdout).contains("fast"));
}

#[test]
fn workers_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_permlab"))
        .args([
            "trials",
            "missing.json",
            "missing.json",
            "--out",
            "/dev/null",
        ])
        .env("PERMLAB_WORKERS", "not-a-number")
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("invalid value") && stderr.contains("not-a-number"),
        "{stderr}"
    );
}
