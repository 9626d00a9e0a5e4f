//! CLI integration: exercises the binary end to end against the bundled
//! configs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tsnbridge"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.toml"))
}

#[test]
fn validate_accepts_bundled_config() {
    let out = bin()
        .args(["validate", "--config"])
        .arg(config("ideal_3ep"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("3 endpoint(s)"));
    assert!(stdout.contains("0 error(s)"));
}

#[test]
fn validate_rejects_unknown_key() {
    let dir = tempdir("validate_reject");
    let path = dir.join("bad.toml");
    fs::write(&path, "horizon_ns = 1\nendpoint_count = 1\nbogus = 1\n").unwrap();
    let out = bin()
        .args(["validate", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bogus"), "{stderr}");
}

#[test]
fn run_writes_reports_and_is_reproducible() {
    let dir_a = tempdir("run_a");
    let dir_b = tempdir("run_b");
    for dir in [&dir_a, &dir_b] {
        let out = bin()
            .args(["run", "--config"])
            .arg(config("ideal_1ep"))
            .arg("--out")
            .arg(dir)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in ["report.json", "report.txt", "residence_0.csv"] {
        let a = fs::read(dir_a.join(file)).unwrap();
        let b = fs::read(dir_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} not byte-identical");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir_a.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 10);
    assert_eq!(json["bridge"]["total_dropped"], 0);
    let csv = fs::read_to_string(dir_a.join("residence_0.csv")).unwrap();
    assert!(csv.starts_with("seq,type,ingress_ns,egress_ns,residence_ns\n"));
    assert_eq!(csv.lines().count(), 1 + 158);
}

#[test]
fn run_honors_overrides() {
    let dir = tempdir("run_override");
    let out = bin()
        .args(["run", "--config"])
        .arg(config("ideal_3ep"))
        .args(["--endpoints", "2", "--seed", "42", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 42);
    assert_eq!(json["endpoints"].as_array().unwrap().len(), 2);
}

#[test]
fn compare_report_with_itself_is_all_zero_deltas() {
    let dir = tempdir("compare_self");
    let out = bin()
        .args(["run", "--config"])
        .arg(config("ideal_1ep"))
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let report = dir.join("report.json");
    let out = bin()
        .arg("compare")
        .arg(&report)
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for line in stdout.lines().filter(|l| l.contains("delivered")) {
        assert!(line.trim_end().ends_with('0'), "{line}");
    }
}

#[test]
fn sweep_prints_aggregate() {
    let out = bin()
        .args(["sweep", "--config"])
        .arg(config("ideal_1ep"))
        .args(["--seed-from", "1", "--seed-to", "2"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("aggregate over 2 seed(s)"), "{stdout}");
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("tsnbridge_cli_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}
