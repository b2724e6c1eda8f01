//! The three subcommands and their exit-code contract.
//!
//! 0: success. 1: a verification property or scenario oracle failed.
//! 2: the input is unusable (config parse or validation error, missing
//! file, unknown scenario name, bad environment). 3: the solver failed at
//! runtime, or an output file could not be written.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Context;
use granuflow::fields::VectorField;
use granuflow::scenarios::{
    builtin_scenarios, run_scenario, scenario_by_name, Scenario, ScenarioOutcome, StepRecord,
};
use granuflow::solver::{simulate, StepContext};
use granuflow::verify::run_property_suite;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{fmt_f64, ConfigFile};
use crate::output::{timeseries_csv, vtk_snapshot, write_text, FileKind, OutputManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Runs one simulation described by a TOML config and writes the echoed
/// config, the per-step CSV, field snapshots, and the manifest.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path) -> i32 {
    let file = match ConfigFile::load(config_path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let cfg = match file.to_sim_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid config: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("cannot create output directory {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }

    let hash = file.hash();
    let run_id = format!("run-{}", &hash[..12]);
    let v0 = VectorField::zeros(cfg.grid);
    let pf0 = file.initial_pore_pressure(cfg.grid);

    // Snapshots stream to disk as the run progresses; the first write
    // failure is remembered and surfaced after the run ends.
    let every = file.output.vtk_every;
    let mut records: Vec<StepRecord> = Vec::with_capacity(cfg.step_count());
    let mut snapshots: Vec<String> = Vec::new();
    let mut io_err: Option<anyhow::Error> = None;
    let mut observe = |ctx: &StepContext<'_>| {
        records.push(StepRecord::from_context(ctx));
        if every > 0 && ctx.step.is_multiple_of(every) && io_err.is_none() {
            let name = format!("fields_{:06}.vtk", ctx.step);
            match write_text(&out_dir.join(&name), &vtk_snapshot(ctx.state, ctx.cfg)) {
                Ok(()) => snapshots.push(name),
                Err(e) => io_err = Some(e),
            }
        }
    };
    let state = match simulate(&cfg, v0, pf0, &mut [&mut observe]) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("solver error: {e}");
            return EXIT_SOLVER;
        }
    };
    if let Some(e) = io_err {
        eprintln!("io error: {e:#}");
        return EXIT_SOLVER;
    }

    let mut manifest = OutputManifest::new(&run_id, &hash);
    let written = (|| -> anyhow::Result<()> {
        write_text(&out_dir.join("config_echo.toml"), &file.canonical_toml())?;
        manifest.push("config_echo.toml", FileKind::Report);
        write_text(&out_dir.join("timeseries.csv"), &timeseries_csv(&records))?;
        manifest.push("timeseries.csv", FileKind::TimeseriesCsv);
        for name in &snapshots {
            manifest.push(name, FileKind::FieldVtk);
        }
        write_text(&out_dir.join("final.vtk"), &vtk_snapshot(&state, &cfg))?;
        manifest.push("final.vtk", FileKind::FieldVtk);
        write_text(&out_dir.join("manifest.json"), &manifest.to_json())?;
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("io error: {e:#}");
        return EXIT_SOLVER;
    }
    println!("{run_id}: {} steps, final t = {}", records.len(), fmt_f64(state.t));
    EXIT_OK
}

/// Runs the property suite and writes a machine-readable report.
pub fn cmd_verify(out_dir: &Path) -> i32 {
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("cannot create output directory {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }
    let reports = run_property_suite();
    for r in &reports {
        println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.name);
    }
    let all_passed = reports.iter().all(|r| r.passed);

    let props: Vec<serde_json::Value> = reports
        .iter()
        .map(|r| {
            let metrics: Vec<serde_json::Value> = r
                .metrics
                .iter()
                .map(|(name, value)| json!({ "name": name, "value": value }))
                .collect();
            json!({
                "name": r.name,
                "passed": r.passed,
                "metrics": metrics,
                "failure": r.failure,
            })
        })
        .collect();
    let doc = json!({ "passed": all_passed, "properties": props });
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');

    // The suite has no run config; its identity is the property list.
    let names: Vec<&str> = reports.iter().map(|r| r.name).collect();
    let digest = Sha256::digest(names.join("\n").as_bytes());
    let suite_hash: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let mut manifest = OutputManifest::new(format!("verify-{}", &suite_hash[..12]), &suite_hash);
    let written = (|| -> anyhow::Result<()> {
        write_text(&out_dir.join("verify_report.json"), &text)?;
        manifest.push("verify_report.json", FileKind::Report);
        write_text(&out_dir.join("manifest.json"), &manifest.to_json())?;
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("io error: {e:#}");
        return EXIT_SOLVER;
    }

    if all_passed {
        EXIT_OK
    } else {
        let first = reports.iter().find(|r| !r.passed).expect("a failure exists");
        eprintln!(
            "first failing property: {}{}",
            first.name,
            first.failure.as_deref().map(|m| format!(" ({m})")).unwrap_or_default()
        );
        EXIT_CHECK_FAILED
    }
}

enum RunStatus {
    Pass,
    CheckFailed(String),
    SolverFailed(String),
    IoFailed(String),
}

struct RunSummary {
    name: &'static str,
    status: RunStatus,
}

/// Runs builtin scenarios, each into its own subdirectory. An empty or
/// absent filter selects all builtins. `GRANUFLOW_THREADS` sets how many
/// run concurrently (default 1, one simulation per worker).
pub fn cmd_scenarios(only: Option<&str>, out_dir: &Path) -> i32 {
    let workers = match thread_count() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let scenarios = match select_scenarios(only) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("cannot create output directory {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }

    let n = scenarios.len();
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<RunSummary>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let summary = run_one(&scenarios[i], out_dir);
                *slots[i].lock().expect("no panics hold this lock") = Some(summary);
            });
        }
    });

    let mut first_check: Option<String> = None;
    let mut first_solver: Option<String> = None;
    for slot in &slots {
        let s = slot.lock().expect("workers are done").take().expect("every slot was filled");
        match s.status {
            RunStatus::Pass => println!("PASS {}", s.name),
            RunStatus::CheckFailed(label) => {
                println!("FAIL {} ({label})", s.name);
                first_check.get_or_insert(format!("{}: {label}", s.name));
            }
            RunStatus::SolverFailed(msg) | RunStatus::IoFailed(msg) => {
                println!("ERROR {}", s.name);
                first_solver.get_or_insert(msg);
            }
        }
    }
    if let Some(m) = first_solver {
        eprintln!("{m}");
        return EXIT_SOLVER;
    }
    if let Some(m) = first_check {
        eprintln!("oracle failed: {m}");
        return EXIT_CHECK_FAILED;
    }
    EXIT_OK
}

fn thread_count() -> Result<usize, String> {
    match std::env::var("GRANUFLOW_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(format!("GRANUFLOW_THREADS is unreadable: {e}")),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(format!("GRANUFLOW_THREADS = {s:?} must be a positive integer")),
        },
    }
}

fn select_scenarios(only: Option<&str>) -> Result<Vec<Scenario>, String> {
    let Some(filter) = only else {
        return Ok(builtin_scenarios());
    };
    let names: Vec<&str> = filter.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Ok(builtin_scenarios());
    }
    let mut picked = Vec::with_capacity(names.len());
    for name in names {
        match scenario_by_name(name) {
            Some(sc) => picked.push(sc),
            None => {
                let known: Vec<&str> = builtin_scenarios().iter().map(|s| s.name).collect();
                return Err(format!("unknown scenario '{name}'; builtins: {}", known.join(", ")));
            }
        }
    }
    Ok(picked)
}

fn run_one(sc: &Scenario, out_dir: &Path) -> RunSummary {
    let outcome = match run_scenario(sc) {
        Ok(o) => o,
        Err(e) => return RunSummary { name: sc.name, status: RunStatus::SolverFailed(e.to_string()) },
    };
    if let Err(e) = write_scenario_artifacts(sc, &outcome, &out_dir.join(sc.name)) {
        return RunSummary { name: sc.name, status: RunStatus::IoFailed(format!("{e:#}")) };
    }
    match outcome.checks.iter().find(|c| !c.passed) {
        None => RunSummary { name: sc.name, status: RunStatus::Pass },
        Some(c) => RunSummary { name: sc.name, status: RunStatus::CheckFailed(c.label.clone()) },
    }
}

/// Builtin scenarios carry closures rather than a TOML file, so their
/// config identity is a digest of the name and the configuration's debug
/// form, which is stable across runs of the same build.
fn scenario_hash(sc: &Scenario) -> String {
    let digest = Sha256::digest(format!("{}\n{:?}", sc.name, sc.cfg).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_scenario_artifacts(
    sc: &Scenario,
    outcome: &ScenarioOutcome,
    dir: &Path,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let checks: Vec<serde_json::Value> = outcome
        .checks
        .iter()
        .map(|c| {
            json!({
                "label": c.label,
                "passed": c.passed,
                "measured": c.measured,
                "bound": c.bound,
            })
        })
        .collect();
    let max_div = outcome.records.iter().map(|r| r.div_inf).fold(0.0f64, f64::max);
    let doc = json!({
        "scenario": outcome.name,
        "headline": sc.headline,
        "passed": outcome.passed(),
        "steps": outcome.records.len(),
        "final_t": outcome.state.t,
        "max_div_inf": max_div,
        "checks": checks,
    });
    let mut report = serde_json::to_string_pretty(&doc).expect("report serializes");
    report.push('\n');

    let mut manifest = OutputManifest::new(format!("scenario-{}", sc.name), scenario_hash(sc));
    write_text(&dir.join("timeseries.csv"), &timeseries_csv(&outcome.records))?;
    manifest.push("timeseries.csv", FileKind::TimeseriesCsv);
    write_text(&dir.join("final.vtk"), &vtk_snapshot(&outcome.state, &sc.cfg))?;
    manifest.push("final.vtk", FileKind::FieldVtk);
    write_text(&dir.join("report.json"), &report)?;
    manifest.push("report.json", FileKind::Report);
    write_text(&dir.join("manifest.json"), &manifest.to_json())?;
    Ok(())
}
