use std::path::Path;
use std::process::{Command, Output};

use twinbeam::output::{parse_traces_csv, CSV_HEADER};

fn twinbeam(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twinbeam"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

#[test]
fn analytic_preset_writes_every_trace_point() {
    let tmp = tempfile::tempdir().unwrap();
    let out = twinbeam(&["run", "analytic", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("o/analytic.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    let rows = parse_traces_csv(&text).unwrap();
    assert_eq!(rows.len(), 4 * 200);
    for name in ["analytic.svg", "results.json", "run_manifest.json"] {
        assert!(tmp.path().join("o").join(name).exists(), "{name}");
    }
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(include_str!("../presets/analytic.json")).unwrap();
    doc["grid"] = serde_json::json!({ "frequencies_hz": [] });
    std::fs::write(&cfg, doc.to_string()).unwrap();
    let out = twinbeam(&["run", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn missing_config_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = twinbeam(&["run", "no_such_file.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_runtime_code() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("blocker"), "").unwrap();
    let out = twinbeam(&["run", "analytic", "--out", "blocker/o"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulated_runs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |d: &str| {
        let out = twinbeam(
            &["run", "measure_10MHz", "--mode", "both", "--seed", "3", "--format", "csv,json", "--out", d],
            tmp.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run("a");
    run("b");
    for f in ["simulated_10MHz.csv", "residuals_10MHz.csv", "results.json"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
    assert!(!tmp.path().join("a/simulated_10MHz.svg").exists());
}

#[test]
fn presets_are_listed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = twinbeam(&["presets"], tmp.path());
    let text = String::from_utf8_lossy(&out.stdout);
    for p in ["analytic", "measure_2MHz", "measure_5MHz", "measure_10MHz"] {
        assert!(text.lines().any(|l| l == p), "{p}");
    }
}
