use std::path::Path;
use std::process::{Command, Output};

use rfiqkd_core::scenario::{parse_csv, parse_json, presets};

fn rfiqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfiqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_preset(name: &str, out: &Path, format: &str, threads: &str) -> Output {
    rfiqkd(&[
        "run",
        "--scenario",
        &format!("preset:{name}"),
        "--seed",
        "5",
        "--pulse-scale",
        "100",
        "--out",
        out.to_str().unwrap(),
        "--format",
        format,
        "--threads",
        threads,
    ])
}

#[test]
fn run_writes_one_row_per_window_and_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("drift.csv");
    let status = run_preset("drift", &out, "csv", "1");
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let (comment, rows) = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 48);
    let expected_hash = {
        let mut c = presets::drift();
        c.seed = 5;
        c.config_hash()
    };
    assert_eq!(
        comment.unwrap(),
        format!(
            "# rfiqkd {} seed=5 config_hash={expected_hash}",
            env!("CARGO_PKG_VERSION")
        )
    );
    assert_eq!(text.lines().count(), 50);
}

#[test]
fn output_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(run_preset("burst", &a, "csv", "1").status.success());
    assert!(run_preset("burst", &b, "csv", "3").status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn csv_and_json_outputs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("out.csv");
    let json = dir.path().join("out.json");
    assert!(run_preset("drift", &csv, "csv", "2").status.success());
    assert!(run_preset("drift", &json, "json", "2").status.success());
    let (_, from_csv) = parse_csv(&std::fs::read_to_string(csv).unwrap()).unwrap();
    let (meta, from_json) = parse_json(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(from_csv, from_json);
    assert_eq!(meta.seed, 5);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let mut text = presets::drift().to_toml().unwrap();
    text = text.replace("efficiency = 0.15", "efficiency = 1.5");
    std::fs::write(&bad, text).unwrap();
    let out = rfiqkd(&["validate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("detector.efficiency"));

    let out = rfiqkd(&["validate", "--scenario", "preset:storm"]);
    assert_eq!(out.status.code(), Some(2));

    let out = rfiqkd(&[
        "run",
        "--scenario",
        "preset:drift",
        "--pulse-scale",
        "0",
        "--out",
        "x.csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pulse_scale"));
}

#[test]
fn io_errors_exit_3_and_name_the_path() {
    let out = rfiqkd(&["validate", "--scenario", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/scenario.toml"));

    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing-dir").join("out.csv");
    let out = run_preset("drift", &target, "csv", "1");
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing-dir"));
}

#[test]
fn presets_list_and_show() {
    let out = rfiqkd(&["presets"]);
    assert!(out.status.success());
    let listing = String::from_utf8(out.stdout).unwrap();
    assert!(listing.contains("drift: 24 windows x 10 s"));
    assert!(listing.contains("burst: 24 windows x 10 s"));

    let out = rfiqkd(&["presets", "--show", "burst"]);
    assert!(out.status.success());
    let shown = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        rfiqkd_core::ScenarioConfig::from_toml(&shown).unwrap(),
        presets::burst()
    );
}

#[test]
fn shipped_scenario_files_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    for name in ["drift", "burst"] {
        let path = root.join(format!("{name}.toml"));
        let out = rfiqkd(&["validate", "--scenario", path.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed = rfiqkd_core::ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(parsed, presets::preset(name).unwrap());
    }
}
