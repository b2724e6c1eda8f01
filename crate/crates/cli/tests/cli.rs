//! End-to-end checks of the command layer: exit codes, artifact layout,
//! and byte-level determinism of the outputs.

use std::path::Path;
use std::process::Command;

use granuflow_cli::commands::{cmd_scenarios, cmd_simulate, cmd_verify, EXIT_CONFIG, EXIT_OK};

const SMALL_CONFIG: &str = "
[grid]
nx = 8
ny = 8

[time]
dt = 1e-3
t_end = 4e-3

[forcing]
pf_pulse_amplitude = 0.5
pf_pulse_width = 0.15
";

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn simulate_writes_the_full_artifact_set() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_CONFIG);
    let out = tmp.path().join("out");
    assert_eq!(cmd_simulate(&cfg, &out), EXIT_OK);

    let manifest: serde_json::Value = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["run_id"].as_str().unwrap().starts_with("run-"));
    let files = manifest["files"].as_array().unwrap();
    let listed: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(listed, ["config_echo.toml", "timeseries.csv", "final.vtk"]);
    for f in files {
        assert!(out.join(f["path"].as_str().unwrap()).exists());
    }
    assert_eq!(files[1]["kind"], "timeseries_csv");
    assert_eq!(files[2]["kind"], "field_vtk");

    // 4 steps of records plus the header.
    let csv = read(&out.join("timeseries.csv"));
    assert_eq!(csv.lines().count(), 5);

    // The echo is itself a valid config carrying every default.
    let echo = read(&out.join("config_echo.toml"));
    assert!(echo.contains("picard_max = 200"));
    assert!(echo.contains("advection = \"upwind\""));
}

#[test]
fn an_unforced_run_reports_exactly_zero_kinetic_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_CONFIG);
    let out = tmp.path().join("out");
    assert_eq!(cmd_simulate(&cfg, &out), EXIT_OK);
    let csv = read(&out.join("timeseries.csv"));
    for row in csv.lines().skip(1) {
        let kinetic = row.split(',').nth(1).unwrap();
        assert_eq!(kinetic, "0.0000000000000000e0", "row {row}");
    }
}

#[test]
fn two_identical_runs_produce_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_CONFIG);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(cmd_simulate(&cfg, &a), EXIT_OK);
    assert_eq!(cmd_simulate(&cfg, &b), EXIT_OK);
    for name in ["timeseries.csv", "final.vtk", "manifest.json", "config_echo.toml"] {
        assert_eq!(read(&a.join(name)), read(&b.join(name)), "{name} differs");
    }
}

#[test]
fn snapshot_cadence_writes_numbered_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL_CONFIG}\n[output]\nvtk_every = 2\n"));
    let out = tmp.path().join("out");
    assert_eq!(cmd_simulate(&cfg, &out), EXIT_OK);
    assert!(out.join("fields_000002.vtk").exists());
    assert!(out.join("fields_000004.vtk").exists());
    assert!(!out.join("fields_000001.vtk").exists());
    let manifest = read(&out.join("manifest.json"));
    assert!(manifest.contains("fields_000002.vtk"));
}

#[test]
fn config_problems_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");

    let missing = tmp.path().join("nope.toml");
    assert_eq!(cmd_simulate(&missing, &out), EXIT_CONFIG);

    let unknown_key = write_config(tmp.path(), "[grid]\nnx = 8\nnz = 3\n");
    assert_eq!(cmd_simulate(&unknown_key, &out), EXIT_CONFIG);

    let bad_value = write_config(tmp.path(), "[time]\ndt = 0.0\n");
    assert_eq!(cmd_simulate(&bad_value, &out), EXIT_CONFIG);

    // Nothing was written for any of the rejected configs.
    assert!(!out.join("timeseries.csv").exists());
}

#[test]
fn an_unknown_scenario_name_exits_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(cmd_scenarios(Some("heat-decay,turbo-mode"), &out), EXIT_CONFIG);
    assert!(!out.join("heat-decay").exists(), "nothing runs when any name is unknown");
}

#[test]
fn a_single_scenario_filter_runs_just_that_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(cmd_scenarios(Some("heat-decay"), &out), EXIT_OK);

    let dir = out.join("heat-decay");
    let report: serde_json::Value = serde_json::from_str(&read(&dir.join("report.json"))).unwrap();
    assert_eq!(report["scenario"], "heat-decay");
    assert_eq!(report["passed"], true);
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));

    let manifest: serde_json::Value =
        serde_json::from_str(&read(&dir.join("manifest.json"))).unwrap();
    assert_eq!(manifest["run_id"], "scenario-heat-decay");
    assert!(dir.join("timeseries.csv").exists());
    assert!(dir.join("final.vtk").exists());

    // Only the requested scenario ran.
    assert!(!out.join("quiescent-plug").exists());
}

#[test]
fn the_cli_binary_maps_usage_and_environment_errors() {
    let bin = env!("CARGO_BIN_EXE_granuflow");
    let tmp = tempfile::tempdir().unwrap();

    let help = Command::new(bin).arg("--help").output().unwrap();
    assert!(help.status.success());
    let text = String::from_utf8_lossy(&help.stdout);
    assert!(text.contains("simulate") && text.contains("verify") && text.contains("scenarios"));

    let missing = Command::new(bin)
        .args(["simulate", "--config", "does-not-exist.toml", "--out"])
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let err = String::from_utf8_lossy(&missing.stderr);
    assert!(err.contains("does-not-exist.toml"), "stderr names the path: {err}");

    let bad_threads = Command::new(bin)
        .args(["scenarios", "--only", "heat-decay", "--out"])
        .arg(tmp.path().join("out2"))
        .env("GRANUFLOW_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
}

#[test]
fn scenario_runs_are_reproducible_across_worker_counts() {
    let bin = env!("CARGO_BIN_EXE_granuflow");
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));

    let serial = Command::new(bin)
        .args(["scenarios", "--only", "heat-decay,quiescent-plug", "--out"])
        .arg(&a)
        .output()
        .unwrap();
    assert_eq!(serial.status.code(), Some(0), "{}", String::from_utf8_lossy(&serial.stderr));

    let parallel = Command::new(bin)
        .args(["scenarios", "--only", "heat-decay,quiescent-plug", "--out"])
        .arg(&b)
        .env("GRANUFLOW_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(parallel.status.code(), Some(0));

    // Worker count affects scheduling only, never file contents, and the
    // summary lines keep the builtin order.
    for name in ["heat-decay", "quiescent-plug"] {
        let rel = format!("{name}/timeseries.csv");
        assert_eq!(read(&a.join(&rel)), read(&b.join(&rel)), "{rel} differs");
    }
    assert_eq!(serial.stdout, parallel.stdout);
}

#[test]
fn verify_writes_a_report_listing_every_property() {
    // This runs the whole suite, including the manufactured solution on
    // three grids; it is the slowest test in the file by far.
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(cmd_verify(&out), EXIT_OK);

    let report: serde_json::Value =
        serde_json::from_str(&read(&out.join("verify_report.json"))).unwrap();
    assert_eq!(report["passed"], true);
    let names: Vec<&str> = report["properties"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "constitutive-monotonicity",
            "residual-decay",
            "truncation-properties",
            "lemma-harness-decay",
            "mms-spatial-order",
            "heat-decay-oracle"
        ]
    );
}
