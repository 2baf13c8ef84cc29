//! Black-box tests of the binary: exit codes, artifacts, determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn flowlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flowlab"))
}

#[test]
fn list_presets_prints_all_names() {
    let out = flowlab().arg("list-presets").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = stdout.lines().collect();
    assert_eq!(names.len(), 12);
    assert!(names.contains(&"oracle-match"));
    assert!(names.contains(&"blow-up"));
}

#[test]
fn unknown_preset_exits_2() {
    let out = flowlab().args(["preset", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_exits_2() {
    let out = flowlab()
        .args(["run", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{ \"id\": \"x\", ").unwrap();
    let out = flowlab()
        .args(["run", "--config", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line"), "stderr: {stderr}");
}

#[test]
fn usage_error_exits_2() {
    let out = flowlab().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn preset_writes_report_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowlab()
        .args(["preset", "hr-interval", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["status"], "pass");
    assert_eq!(report["experiment_id"], "hr-interval");
    assert!(report["assertions"].as_array().unwrap().len() >= 3);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,V,ut_norm,a_1,"));
    assert!(csv.lines().count() > 100);
}

#[test]
fn scalar_presets_write_scalar_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowlab()
        .args(["preset", "slow-decay", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("flat_exp.csv").exists());
    assert!(dir.path().join("nonlocal_log.csv").exists());
    assert!(!dir.path().join("trajectory.csv").exists());
}

fn run_config_into(config: &serde_json::Value, dir: &Path) -> std::process::Output {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    flowlab()
        .args([
            "run",
            "--config",
            path.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap()
}

#[test]
fn run_executes_a_config_file() {
    let cfg = flowlab::cli::preset("prop41-i").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run_config_into(&serde_json::to_value(&cfg).unwrap(), dir.path());
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn failed_assertion_exits_1() {
    // same pipeline, but demand an impossible decay rate
    let mut cfg = serde_json::to_value(flowlab::cli::preset("prop41-i").unwrap()).unwrap();
    cfg["analyses"][0]["expected_delta"] = serde_json::json!(5.0);
    let dir = tempfile::tempdir().unwrap();
    let out = run_config_into(&cfg, dir.path());
    assert_eq!(out.status.code(), Some(1), "{:?}", out);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["status"], "fail");
}

#[test]
fn runtime_error_exits_3() {
    // references a spectral group that does not exist in the basis
    let mut cfg = serde_json::to_value(flowlab::cli::preset("prop41-i").unwrap()).unwrap();
    cfg["pipeline"]["flow"]["l_group"] = serde_json::json!(99);
    let dir = tempfile::tempdir().unwrap();
    let out = run_config_into(&cfg, dir.path());
    assert_eq!(out.status.code(), Some(3), "{:?}", out);
}

#[test]
fn identical_runs_are_deterministic() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let out = flowlab()
            .args(["preset", "prop41-iii", "--out", dir.path().to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    let csv_a = fs::read(dirs[0].path().join("trajectory.csv")).unwrap();
    let csv_b = fs::read(dirs[1].path().join("trajectory.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "trajectory CSV must be byte-identical");
    let mut reports: Vec<serde_json::Value> = dirs
        .iter()
        .map(|d| {
            serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap())
                .unwrap()
        })
        .collect();
    for r in &mut reports {
        r.as_object_mut().unwrap().remove("wall_ms");
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn blow_up_preset_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = flowlab()
        .args(["preset", "blow-up", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{:?}", out);
}
