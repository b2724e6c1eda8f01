//! Artifact writers. Every byte they emit is a deterministic function of
//! the run data: floats are printed at 17 significant digits, rows end in
//! a bare line feed, and column and block orders are fixed. Two runs of
//! the same configuration therefore produce identical files.

use std::path::Path;

use anyhow::Context;
use granuflow::fields::sym_gradient;
use granuflow::rheology::total_stress;
use granuflow::scenarios::StepRecord;
use granuflow::solver::{SimConfig, SimState};
use granuflow::tensor::SymTensor;
use serde::Serialize;

use crate::config::fmt_f64;

/// Column order of the per-step time series.
pub const CSV_HEADER: &str = "t,kinetic_energy,viscous_dissipation,plastic_dissipation,\
slip_dissipation,div_v_inf,energy_slack,pf_l2";

/// Renders the per-step records as RFC 4180 CSV with LF line endings.
pub fn timeseries_csv(records: &[StepRecord]) -> String {
    let mut out = String::with_capacity(180 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let cols = [
            r.t,
            r.kinetic_energy,
            r.energy.viscous_dissipation,
            r.energy.plastic_dissipation,
            r.energy.slip_dissipation,
            r.div_inf,
            r.energy.gamma2_slack,
            r.pf_l2,
        ];
        for (k, c) in cols.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(*c));
        }
        out.push('\n');
    }
    out
}

/// Renders the state as a legacy ASCII VTK structured-points file.
///
/// Cell data: pressure, pore pressure, strain-rate magnitude, total
/// deviatoric stress magnitude, and the cell-averaged velocity. The
/// legacy ASCII format is chosen deliberately: snapshots diff cleanly.
pub fn vtk_snapshot(state: &SimState, cfg: &SimConfig) -> String {
    let g = state.grid();
    let n = g.cell_count();
    let mut out = String::with_capacity(n * 130 + 512);

    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(&format!("granular flow state at t = {}\n", fmt_f64(state.t)));
    out.push_str("ASCII\n");
    out.push_str("DATASET STRUCTURED_POINTS\n");
    out.push_str(&format!("DIMENSIONS {} {} 1\n", g.nx + 1, g.ny + 1));
    out.push_str("ORIGIN 0 0 0\n");
    out.push_str(&format!("SPACING {} {} 1\n", fmt_f64(g.hx()), fmt_f64(g.hy())));
    out.push_str(&format!("CELL_DATA {n}\n"));

    let scalar = |name: &str, values: &mut dyn FnMut(usize, usize) -> f64, out: &mut String| {
        out.push_str(&format!("SCALARS {name} double 1\n"));
        out.push_str("LOOKUP_TABLE default\n");
        for j in 0..g.ny {
            for i in 0..g.nx {
                out.push_str(&fmt_f64(values(i, j)));
                out.push('\n');
            }
        }
    };

    let d = sym_gradient(&state.v);
    let p_s = cfg.lithostatic.sample_cells(g, state.t);

    scalar("p", &mut |i, j| state.p.at(i, j), &mut out);
    scalar("p_f", &mut |i, j| state.p_f.at(i, j), &mut out);
    scalar("strain_rate_mag", &mut |i, j| d.at(i, j).norm(), &mut out);
    scalar(
        "stress_mag",
        &mut |i, j| {
            total_stress(d.at(i, j), state.p_f.at(i, j), p_s.at(i, j), &cfg.rheology).total.norm()
        },
        &mut out,
    );

    out.push_str("VECTORS velocity double\n");
    for j in 0..g.ny {
        for i in 0..g.nx {
            let u = 0.5 * (state.v.u_at(i, j) + state.v.u_at(i + 1, j));
            let v = 0.5 * (state.v.v_at(i, j) + state.v.v_at(i, j + 1));
            out.push_str(&format!("{} {} 0\n", fmt_f64(u), fmt_f64(v)));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FileKind {
    TimeseriesCsv,
    FieldVtk,
    Report,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub kind: FileKind,
}

/// Index of the files a command produced, written last as manifest.json.
#[derive(Debug, Clone, Serialize)]
pub struct OutputManifest {
    pub run_id: String,
    pub config_hash: String,
    pub files: Vec<ManifestEntry>,
}

impl OutputManifest {
    pub fn new(run_id: impl Into<String>, config_hash: impl Into<String>) -> Self {
        Self { run_id: run_id.into(), config_hash: config_hash.into(), files: Vec::new() }
    }

    pub fn push(&mut self, path: impl Into<String>, kind: FileKind) {
        self.files.push(ManifestEntry { path: path.into(), kind });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use granuflow::analysis::energy_report;
    use granuflow::fields::{Grid, ScalarField, VectorField};

    fn tiny_state() -> (SimConfig, SimState) {
        let g = Grid::new(4, 5, 1.0, 1.0);
        let cfg = SimConfig::new(g);
        let v = VectorField::from_fn(g, |_, y| y, |_, _| 0.0);
        let state =
            SimState { t: 0.25, v, p: ScalarField::constant(g, 1.0), p_f: ScalarField::zeros(g) };
        (cfg, state)
    }

    fn state_one_step_earlier(cfg: &SimConfig, state: &SimState) -> SimState {
        let g = state.grid();
        SimState {
            t: state.t - cfg.dt,
            v: state.v.clone(),
            p: ScalarField::zeros(g),
            p_f: ScalarField::zeros(g),
        }
    }

    #[test]
    fn the_csv_has_a_fixed_header_and_lf_rows() {
        let (cfg, state) = tiny_state();
        let prev = state_one_step_earlier(&cfg, &state);
        let rec = StepRecord {
            step: 1,
            t: 0.25,
            kinetic_energy: 0.5,
            v_max: 1.0,
            pf_l2: 0.0,
            div_inf: 0.0,
            boundary_normal_inf: 0.0,
            picard_sweeps: 3,
            max_cfl: None,
            energy: energy_report(&prev, &state, &cfg),
        };
        let csv = timeseries_csv(&[rec]);
        let mut lines = csv.split('\n');
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 8);
        assert!(row.starts_with("2.5000000000000000e-1,5.0000000000000000e-1,"), "{row}");
        assert!(!csv.contains('\r'));
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn the_vtk_snapshot_declares_every_block() {
        let (cfg, state) = tiny_state();
        let vtk = vtk_snapshot(&state, &cfg);
        let lines: Vec<&str> = vtk.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[2], "ASCII");
        assert_eq!(lines[3], "DATASET STRUCTURED_POINTS");
        assert_eq!(lines[4], "DIMENSIONS 5 6 1");
        assert!(vtk.contains("CELL_DATA 20"));
        for block in ["SCALARS p double 1", "SCALARS p_f double 1", "SCALARS strain_rate_mag double 1", "SCALARS stress_mag double 1", "VECTORS velocity double"] {
            assert!(vtk.contains(block), "missing {block}");
        }
        // Four scalar blocks of 20 cells, one vector block, headers.
        let value_lines = lines.iter().filter(|l| l.ends_with(" 0") && l.contains("e")).count();
        assert_eq!(value_lines, 20);
    }

    #[test]
    fn the_manifest_serializes_with_snake_case_kinds() {
        let mut m = OutputManifest::new("run-abc", "deadbeef");
        m.push("timeseries.csv", FileKind::TimeseriesCsv);
        m.push("final.vtk", FileKind::FieldVtk);
        m.push("report.json", FileKind::Report);
        let json = m.to_json();
        assert!(json.contains("\"timeseries_csv\""));
        assert!(json.contains("\"field_vtk\""));
        assert!(json.contains("\"report\""));
        assert!(json.contains("\"run_id\": \"run-abc\""));
        assert!(json.ends_with('\n'));
    }
}
