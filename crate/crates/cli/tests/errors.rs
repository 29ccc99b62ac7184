//! The failure contract: exactly one stderr line of the form
//! `error: category=<cat> message="..."`, exit code 2 for usage errors
//! and 1 for everything else.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ttcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttcast")).args(args).output().expect("binary runs")
}

/// Asserts the contract and returns the message payload.
fn expect_error(args: &[&str], code: i32, category: &str) -> String {
    let out = ttcast(args);
    assert_eq!(out.status.code(), Some(code), "args {args:?}");
    let stderr = String::from_utf8(out.stderr).expect("utf-8 stderr");
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "want one stderr line, got {stderr:?}");
    let prefix = format!("error: category={category} message=");
    assert!(
        lines[0].starts_with(&prefix),
        "want prefix {prefix:?}, got {:?}",
        lines[0]
    );
    lines[0][prefix.len()..].to_string()
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).expect("writable temp file");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    expect_error(&["screen", "--bogus"], 2, "usage");
}

#[test]
fn missing_arguments_fold_into_one_line() {
    let message = expect_error(&["estimate"], 2, "usage");
    assert!(message.contains("--bsm"), "message {message:?}");
}

#[test]
fn malformed_flag_value_is_a_usage_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = dir.path().join("m.csv");
    let args = [
        "synth",
        "matrix",
        "--segments",
        "nowhere.csv",
        "--days",
        "1",
        "--window",
        "20:5",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    expect_error(&args, 2, "usage");
}

#[test]
fn missing_input_file_reports_io_with_path() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = dir.path().join("m.csv");
    let args = [
        "synth",
        "matrix",
        "--segments",
        "no_such_segments.csv",
        "--days",
        "1",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    let message = expect_error(&args, 1, "io");
    assert!(message.contains("no_such_segments.csv"), "message {message:?}");
}

#[test]
fn matrix_without_meta_line_is_a_format_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let matrix = dir.path().join("matrix.csv");
    write(&matrix, "segment_id,interval_start_epoch,tt_s\n");
    let out = dir.path().join("d.csv");
    let args = [
        "features",
        "--matrix",
        matrix.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    expect_error(&args, 1, "format");
}

#[test]
fn tune_without_tree_counts_is_a_usage_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let dataset = dir.path().join("d.csv");
    write(&dataset, "tt_lag_1,target,segment_id,interval_start\n1,2,s,0\n");
    let out = dir.path().join("t.csv");
    let args = [
        "tune",
        "--algo",
        "xgb",
        "--dataset",
        dataset.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    let message = expect_error(&args, 2, "usage");
    assert!(message.contains("--t"), "message {message:?}");
}

#[test]
fn garbage_model_file_reports_model_corrupt() {
    let dir = tempfile::tempdir().expect("tempdir");
    let model = dir.path().join("model.json");
    write(&model, "{\"not\": \"a model\"}");
    let dataset = dir.path().join("d.csv");
    write(&dataset, "tt_lag_1,target,segment_id,interval_start\n1,2,s,0\n");
    let out = dir.path().join("p.csv");
    let args = [
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    expect_error(&args, 1, "model-corrupt");
}

#[test]
fn zero_workers_is_a_usage_error() {
    expect_error(&["--workers", "0", "screen", "--matrix", "m.csv", "--out", "s.csv"], 2, "usage");
}
