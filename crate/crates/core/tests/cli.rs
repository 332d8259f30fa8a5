use std::path::Path;
use std::process::{Command, Output};

use mulinl::io::{read_dataset, read_labels, ResultDocument};

fn mulinl(args: &[&str], paths: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mulinl"));
    cmd.args(args);
    for p in paths {
        cmd.arg(p);
    }
    cmd.output().unwrap()
}

fn data_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn synth_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("lines.csv");
    let out = dir.path().join("result.json");
    let synth = mulinl(&["synth", "--scenario", "lines1", "--seed", "5", "--output"], &[&data]);
    assert!(synth.status.success());
    assert_eq!(data_rows(&data), 1350);
    let labels = read_labels(&dir.path().join("lines.labels.csv")).unwrap();
    assert_eq!(labels.len(), 1350);

    let est = Command::new(env!("CARGO_BIN_EXE_mulinl"))
        .args(["estimate", "--model", "line2d", "--seed", "5", "--timing", "--input"])
        .arg(&data)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert!(est.status.success(), "{}", String::from_utf8_lossy(&est.stderr));
    let doc = ResultDocument::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let points = read_dataset(&data, 2).unwrap();
    doc.validate_against(&points).unwrap();
    assert!(doc.structures.len() >= 5);
    assert!(doc.wall_clock.is_some());
    assert_eq!(doc.config.estimator.seed, 5);
}

#[test]
fn scenario_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (name, rows) in [("lines2", 1500), ("circles-fig2", 600)] {
        let data = dir.path().join(format!("{name}.csv"));
        assert!(mulinl(&["synth", "--scenario", name, "--output"], &[&data]).status.success());
        assert_eq!(data_rows(&data), rows, "{name}");
    }
}

#[test]
fn estimate_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let wide = dir.path().join("wide.csv");
    std::fs::write(&wide, "1,2,3\n4,5,6\n").unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("never.json");

    let r = mulinl(&["estimate", "--model", "line2d", "--input"], &[&wide]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("dimension mismatch"));

    let r = Command::new(env!("CARGO_BIN_EXE_mulinl"))
        .args(["estimate", "--model", "line2d", "--input"])
        .arg(&empty)
        .arg("--output")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("too few points"));
    assert!(!out.exists());

    let r = mulinl(&["estimate", "--model", "plane", "--input"], &[&wide]);
    assert_eq!(r.status.code(), Some(1));
    let r = mulinl(&["estimate", "--model", "line2d", "--input"], &[&dir.path().join("missing.csv")]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let r = Command::new(env!("CARGO_BIN_EXE_mulinl"))
        .env("MULINL_THREADS", "zero")
        .args(["synth", "--scenario", "lines1", "--output", "/dev/null"])
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn bench_single_run_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    let json = dir.path().join("report.json");
    let plot = dir.path().join("plot.csv");
    let r = Command::new(env!("CARGO_BIN_EXE_mulinl"))
        .args(["bench", "--scenario", "homography-synth", "--runs", "1", "--trials", "500", "--csv"])
        .arg(&csv)
        .arg("--output")
        .arg(&json)
        .arg("--plot-dump")
        .arg(&plot)
        .output()
        .unwrap();
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let table = String::from_utf8(r.stdout).unwrap();
    assert!(table.starts_with("structure"));
    assert!(table.contains("correct"));
    assert_eq!(data_rows(&csv), 1);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["scenario"], "homography-synth");
    assert_eq!(report["runs"].as_array().unwrap().len(), 1);
    let plot_text = std::fs::read_to_string(&plot).unwrap();
    assert!(plot_text.starts_with("run,rank,index,label,x1,y1,x2,y2"));
    assert_eq!(data_rows(&plot), 600);
}

#[test]
fn unknown_scenario_fails_before_running() {
    let r = mulinl(&["bench", "--scenario", "nowhere", "--runs", "5"], &[]);
    assert_eq!(r.status.code(), Some(2));
    assert!(r.stdout.is_empty());
}
