use std::path::{Path, PathBuf};
use std::process::Command;

use tasep::report::{
    strip_timestamps, ComparisonDoc, ObservablesDoc, SimulateDoc, Table1Doc, VerifyDoc,
};
use tempfile::TempDir;

const ROW1: &str = r#"{"n_cells": 2, "alpha": "2/5",
  "types": [{"a": "3/7", "p": "3/5", "beta": "3/10"},
            {"a": "4/7", "p": "4/5", "beta": "2/5"}]}"#;

const EQUAL_EXIT: &str = r#"{"n_cells": 2, "alpha": 0.3,
  "types": [{"a": 0.25, "p": 0.4, "beta": 0.6},
            {"a": 0.75, "p": 0.9, "beta": 0.6}]}"#;

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("tasep").chain(args.iter().copied());
    let code = tasep::cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn malformed_configs_exit_two() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("syntax.json", "{ not json"),
        (
            "unknown.json",
            r#"{"n_cells": 2, "alpha": 0.5, "types": [{"a": 1, "p": 0.5, "beta": 0.5}], "gamma": 1}"#,
        ),
        (
            "weights.json",
            r#"{"n_cells": 2, "alpha": 0.5, "types": [{"a": 0.5, "p": 0.5, "beta": 0.5}]}"#,
        ),
        (
            "fraction.json",
            r#"{"n_cells": 2, "alpha": "1/0", "types": [{"a": 1, "p": 0.5, "beta": 0.5}]}"#,
        ),
        (
            "alpha.json",
            r#"{"n_cells": 2, "alpha": 1.5, "types": [{"a": 1, "p": 0.5, "beta": 0.5}]}"#,
        ),
        (
            "cells.json",
            r#"{"n_cells": 0, "alpha": 0.5, "types": [{"a": 1, "p": 0.5, "beta": 0.5}]}"#,
        ),
    ];
    for (name, text) in cases {
        let path = write(&dir, name, text);
        let (code, _, err) = run(&["exact", "--config", p(&path)]);
        assert_eq!(code, 2, "{name}: {err}");
        assert!(err.starts_with("error:"), "{name}");
    }
    let (code, _, _) = run(&["exact", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["exact"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["bogus"]);
    assert_eq!(code, 2);
}

#[test]
fn state_cap_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "row1.json", ROW1);
    let (code, _, err) = run(&["exact", "--config", p(&path), "--cap", "5"]);
    assert_eq!(code, 2);
    assert!(err.contains("simulator"), "{err}");
}

#[test]
fn exact_document_round_trips() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "row1.json", ROW1);
    let (code, out, _) = run(&["exact", "--config", p(&path)]);
    assert_eq!(code, 0);
    let doc: ObservablesDoc = serde_json::from_str(&out).unwrap();
    assert_eq!(doc.pi.len(), 9);
    assert!((doc.density[0] - 0.5149).abs() < 5e-5);
    assert!((doc.flow.inflow - doc.flow.outflow).abs() < 1e-10);
}

#[test]
fn approx_document_round_trips() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "row1.json", ROW1);
    let (code, out, _) = run(&["approx", "--config", p(&path)]);
    assert_eq!(code, 0);
    let doc: ComparisonDoc = serde_json::from_str(&out).unwrap();
    assert!((doc.auxiliary.p_star - 0.7).abs() < 1e-12);
    assert!((doc.auxiliary.beta_star - 0.35).abs() < 1e-12);
}

#[test]
fn out_flag_writes_document_and_prints_table() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "row1.json", ROW1);
    let out_path = dir.path().join("exact.json");
    let (code, out, _) = run(&["exact", "--config", p(&path), "--out", p(&out_path)]);
    assert_eq!(code, 0);
    assert!(out.contains("density"), "{out}");
    let doc: ObservablesDoc =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(doc.manifest.outputs, vec![p(&out_path).to_string()]);
}

#[test]
fn csv_and_table_formats() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "row1.json", ROW1);
    for cmd in ["exact", "approx"] {
        let (code, csv, _) = run(&[cmd, "--config", p(&path), "--format", "csv"]);
        assert_eq!(code, 0);
        assert!(csv.lines().count() >= 2, "{csv}");
        let (code, table, _) = run(&[cmd, "--config", p(&path), "--format", "table"]);
        assert_eq!(code, 0);
        assert!(!table.is_empty());
    }
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "row1.json", ROW1);
    let args = [
        "simulate",
        "--config",
        p(&path),
        "--seed",
        "42",
        "--steps",
        "20000",
        "--warmup",
        "100",
    ];
    let docs: Vec<serde_json::Value> = (0..2)
        .map(|_| {
            let (code, out, _) = run(&args);
            assert_eq!(code, 0);
            serde_json::from_str::<SimulateDoc>(&out).unwrap();
            let mut v: serde_json::Value = serde_json::from_str(&out).unwrap();
            strip_timestamps(&mut v);
            v
        })
        .collect();
    assert_eq!(
        serde_json::to_string(&docs[0]).unwrap(),
        serde_json::to_string(&docs[1]).unwrap()
    );
    assert_eq!(docs[0]["seed"], 42);
    let (_, other, _) = run(&[
        "simulate",
        "--config",
        p(&path),
        "--seed",
        "43",
        "--steps",
        "20000",
        "--warmup",
        "100",
    ]);
    let other: SimulateDoc = serde_json::from_str(&other).unwrap();
    assert_ne!(
        serde_json::to_value(&other.density).unwrap(),
        docs[0]["density"]
    );
}

#[test]
fn simulate_rejects_bad_batching() {
    let dir = TempDir::new().unwrap();
    let path = write(&dir, "row1.json", ROW1);
    let (code, _, _) = run(&["simulate", "--config", p(&path), "--batches", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn force_admits_boundary_values() {
    let dir = TempDir::new().unwrap();
    let path = write(
        &dir,
        "zero.json",
        r#"{"n_cells": 2, "alpha": 0, "types": [{"a": 1, "p": 0.5, "beta": 0.5}]}"#,
    );
    let (code, _, _) = run(&["exact", "--config", p(&path)]);
    assert_eq!(code, 2);
    let (code, out, err) = run(&["exact", "--config", p(&path), "--force"]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("warning"));
    let doc: ObservablesDoc = serde_json::from_str(&out).unwrap();
    // no arrivals: the lattice empties
    assert!((doc.pi[0] - 1.0).abs() < 1e-12);
    let (code, _, _) = run(&["approx", "--config", p(&path), "--force"]);
    assert_eq!(code, 2);
}

#[test]
fn force_with_two_absorbing_states_is_numerical() {
    let dir = TempDir::new().unwrap();
    let path = write(
        &dir,
        "stuck.json",
        r#"{"n_cells": 2, "alpha": 0.5, "types": [{"a": 0.5, "p": 0, "beta": 0.5}, {"a": 0.5, "p": 0, "beta": 0.5}]}"#,
    );
    let (code, _, err) = run(&["exact", "--config", p(&path), "--force"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn verify_respects_preconditions() {
    let dir = TempDir::new().unwrap();
    let equal = write(&dir, "equal.json", EQUAL_EXIT);
    let (code, out, _) = run(&["verify", "--config", p(&equal)]);
    assert_eq!(code, 0);
    let doc: VerifyDoc = serde_json::from_str(&out).unwrap();
    assert!(doc.all_pass);

    let row1 = write(&dir, "row1.json", ROW1);
    let (code, _, err) = run(&["verify", "--config", p(&row1)]);
    assert_eq!(code, 2, "{err}");
    let (code, out, _) = run(&["verify", "--config", p(&row1), "--allow-mismatch"]);
    assert_eq!(code, 1);
    let doc: VerifyDoc = serde_json::from_str(&out).unwrap();
    assert!(!doc.all_pass);
}

#[test]
fn verify_suite_and_literal_variant() {
    let (code, out, _) = run(&["verify", "--draws", "10"]);
    assert_eq!(code, 0);
    let doc: VerifyDoc = serde_json::from_str(&out).unwrap();
    assert!(doc.all_pass);
    let (code, out, _) = run(&["verify", "--draws", "10", "--eq23-paper-literal"]);
    assert_eq!(code, 1);
    let doc: VerifyDoc = serde_json::from_str(&out).unwrap();
    let failing: Vec<_> = doc
        .reports
        .iter()
        .flat_map(|r| &r.records)
        .filter(|r| !r.pass)
        .collect();
    assert!(!failing.is_empty());
    assert!(
        failing.iter().all(|r| r.id.starts_with("eq23")),
        "{failing:?}"
    );
}

#[test]
fn table1_reports_every_published_value() {
    let (code, out, _) = run(&["table1"]);
    assert_eq!(code, 0);
    let doc: Table1Doc = serde_json::from_str(&out).unwrap();
    assert_eq!(doc.total, 5 * 6 + 8);
    assert_eq!(doc.rows.len(), 5);
    assert!(doc.rows[..3].iter().all(|r| r.all_pass()));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_tasep");
    let status = Command::new(bin).arg("--version").status().unwrap();
    assert_eq!(status.code(), Some(0));
    let status = Command::new(bin)
        .args(["exact", "--config", "/nonexistent.json"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
}
