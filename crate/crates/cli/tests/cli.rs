//! End-to-end tests for the `cqexp` binary: spec ingestion, sweep output
//! shape, determinism, and the expand round-trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cqexp")
}

fn sample(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 output")
}

#[test]
fn divergence_emits_csv_with_header() {
    let spec = sample("sample-qubit.json");
    let text = stdout(&[
        "divergence",
        "--spec",
        spec.to_str().unwrap(),
        "--alpha-steps",
        "5",
    ]);
    let mut lines = text.lines();
    let header = lines.next().expect("header row");
    assert!(header.starts_with("x,alpha,"), "header was {header}");
    assert!(lines.clone().count() >= 5, "expected data rows:\n{text}");
    for line in lines {
        assert_eq!(
            line.matches(',').count(),
            header.matches(',').count(),
            "ragged row: {line}"
        );
    }
}

#[test]
fn exponents_sweep_is_deterministic() {
    let spec = sample("sample-qubit.json");
    let args = [
        "exponents",
        "--spec",
        spec.to_str().unwrap(),
        "--rmin",
        "0.05",
        "--rmax",
        "0.25",
        "--rsteps",
        "4",
        "--seed",
        "7",
    ];
    let first = stdout(&args);
    let second = stdout(&args);
    assert_eq!(first, second, "same spec/config/seed must give identical CSV");
    assert!(first.lines().count() >= 5, "expected 4 rate rows:\n{first}");
}

#[test]
fn bound_sweep_has_reason_column_and_never_aborts() {
    let spec = sample("sample-qubit.json");
    let text = stdout(&[
        "bound",
        "--spec",
        spec.to_str().unwrap(),
        "--rmin",
        "0.05",
        "--rmax",
        "0.2",
        "--rsteps",
        "2",
        "--n",
        "50,100",
    ]);
    let header = text.lines().next().expect("header row");
    assert!(header.ends_with("notes") || header.contains("reason"), "header was {header}");
    // 2 rates x 2 blocklengths, each cell emits at least one row.
    assert!(text.lines().count() >= 5, "expected 4 cells:\n{text}");
}

#[test]
fn expand_round_trips_the_symmetric_spec() {
    let dir = tempfile::tempdir().expect("tempdir");
    let expanded_path = dir.path().join("expanded.json");
    let spec = sample("sample-symmetric.json");
    stdout(&[
        "expand",
        "--spec",
        spec.to_str().unwrap(),
        "--out",
        expanded_path.to_str().unwrap(),
    ]);
    let expanded = std::fs::read_to_string(&expanded_path).expect("expanded spec");
    let parsed: serde_json::Value = serde_json::from_str(&expanded).expect("valid json");
    assert!(parsed["symmetric"].is_null(), "symmetric block must be gone");
    let inputs = parsed["inputs"].as_u64().expect("inputs") as usize;
    assert_eq!(parsed["matrices"].as_array().map(Vec::len), Some(inputs));

    // The expanded spec must describe the same channel: expanding it again
    // reproduces the matrices up to re-validation noise.
    let twice = stdout(&["expand", "--spec", expanded_path.to_str().unwrap()]);
    let reparsed: serde_json::Value = serde_json::from_str(&twice).expect("valid json");
    let flat = |v: &serde_json::Value| -> Vec<f64> {
        let mut acc = Vec::new();
        fn walk(v: &serde_json::Value, acc: &mut Vec<f64>) {
            match v {
                serde_json::Value::Array(items) => items.iter().for_each(|i| walk(i, acc)),
                serde_json::Value::Number(n) => acc.push(n.as_f64().unwrap()),
                _ => {}
            }
        }
        walk(v, &mut acc);
        acc
    };
    let (a, b) = (flat(&parsed["matrices"]), flat(&reparsed["matrices"]));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12, "entry drift: {x} vs {y}");
    }
}

#[test]
fn bad_spec_fails_with_message() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"dim": 2, "inputs": 3, "matrices": []}"#).unwrap();
    let out = run(&["divergence", "--spec", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("expected 3 matrices"), "stderr was: {err}");
}

#[test]
fn verify_runs_a_fast_suite_and_reports_pass() {
    let text = stdout(&["verify", "--suites", "2", "--seed", "11"]);
    assert!(text.contains("[PASS]"), "output was:\n{text}");
    assert!(text.contains("1 of 1 suites passed"), "output was:\n{text}");
}
