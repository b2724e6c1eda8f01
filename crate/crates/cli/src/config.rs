//! Run configuration as read from a TOML file.
//!
//! Parsing is fail-closed: unknown sections or keys are rejected so a typo
//! cannot silently fall back to a default. Missing keys do take defaults,
//! and the echoed form written next to the outputs has every default
//! filled in. The echo is canonical (fixed section order, fixed key order,
//! floats at 17 significant digits), so hashing it gives a config identity
//! that does not depend on how the input file ordered its keys.

use std::path::Path;

use granuflow::fields::{AdvectionScheme, Grid, ScalarField};
use granuflow::rheology::{RheologyParams, SlipParams};
use granuflow::solver::{BodyForce, Lithostatic, Porosity, SimConfig};
use serde::Deserialize;
use sha2::{Digest, Sha256};

/// Formats a float with 17 significant digits, enough to reproduce the
/// exact bit pattern on read-back.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub grid: GridSection,
    pub rheology: RheologySection,
    pub slip: SlipSection,
    pub time: TimeSection,
    pub forcing: ForcingSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { nx: 64, ny: 64, lx: 1.0, ly: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RheologySection {
    pub nu_star: f64,
    pub delta_star: f64,
    pub q_star: f64,
    pub q_exponent: f64,
    pub reg_n: u64,
    pub permeability: f64,
    pub alpha_drag: f64,
    pub density_fluid: f64,
    /// Porosity bounds; equal bounds mean constant porosity and the
    /// reference pressure is ignored.
    pub porosity_min: f64,
    pub porosity_max: f64,
    pub porosity_ref_pressure: f64,
}

impl Default for RheologySection {
    fn default() -> Self {
        Self {
            nu_star: 0.5,
            delta_star: 0.0,
            q_star: 1.0,
            q_exponent: 2.0,
            reg_n: 1,
            permeability: 1.0,
            alpha_drag: 1.0,
            density_fluid: 1.0,
            porosity_min: 0.5,
            porosity_max: 0.5,
            porosity_ref_pressure: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SlipSection {
    pub s_star: f64,
    pub beta_star: f64,
    pub gamma_star: f64,
}

impl Default for SlipSection {
    fn default() -> Self {
        Self { s_star: 0.0, beta_star: 0.0, gamma_star: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub poisson_tol: f64,
    /// "upwind" or "central".
    pub advection: String,
    pub freeze_velocity: bool,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1e-1,
            picard_tol: 1e-9,
            picard_max: 200,
            poisson_tol: 1e-10,
            advection: "upwind".to_string(),
            freeze_velocity: false,
        }
    }
}

/// Forcing and initial data. The body force is constant in space and
/// time; the lithostatic pressure is constant; the initial pore pressure
/// is a uniform level plus an optional Gaussian pulse.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingSection {
    pub body_x: f64,
    pub body_y: f64,
    pub lithostatic: f64,
    pub pf_uniform: f64,
    pub pf_pulse_amplitude: f64,
    pub pf_pulse_x: f64,
    pub pf_pulse_y: f64,
    pub pf_pulse_width: f64,
}

impl Default for ForcingSection {
    fn default() -> Self {
        Self {
            body_x: 0.0,
            body_y: 0.0,
            lithostatic: 0.0,
            pf_uniform: 0.0,
            pf_pulse_amplitude: 0.0,
            pf_pulse_x: 0.5,
            pf_pulse_y: 0.5,
            pf_pulse_width: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Field snapshot cadence in steps; 0 writes only the final state.
    pub vtk_every: usize,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    /// Canonical TOML echo: every key present, fixed order, numeric
    /// values at full precision. Parsing it back yields an equal config.
    pub fn canonical_toml(&self) -> String {
        let mut s = String::with_capacity(1024);
        let g = &self.grid;
        s.push_str("[grid]\n");
        s.push_str(&format!("nx = {}\n", g.nx));
        s.push_str(&format!("ny = {}\n", g.ny));
        s.push_str(&format!("lx = {}\n", fmt_f64(g.lx)));
        s.push_str(&format!("ly = {}\n", fmt_f64(g.ly)));

        let r = &self.rheology;
        s.push_str("\n[rheology]\n");
        s.push_str(&format!("nu_star = {}\n", fmt_f64(r.nu_star)));
        s.push_str(&format!("delta_star = {}\n", fmt_f64(r.delta_star)));
        s.push_str(&format!("q_star = {}\n", fmt_f64(r.q_star)));
        s.push_str(&format!("q_exponent = {}\n", fmt_f64(r.q_exponent)));
        s.push_str(&format!("reg_n = {}\n", r.reg_n));
        s.push_str(&format!("permeability = {}\n", fmt_f64(r.permeability)));
        s.push_str(&format!("alpha_drag = {}\n", fmt_f64(r.alpha_drag)));
        s.push_str(&format!("density_fluid = {}\n", fmt_f64(r.density_fluid)));
        s.push_str(&format!("porosity_min = {}\n", fmt_f64(r.porosity_min)));
        s.push_str(&format!("porosity_max = {}\n", fmt_f64(r.porosity_max)));
        s.push_str(&format!("porosity_ref_pressure = {}\n", fmt_f64(r.porosity_ref_pressure)));

        let sl = &self.slip;
        s.push_str("\n[slip]\n");
        s.push_str(&format!("s_star = {}\n", fmt_f64(sl.s_star)));
        s.push_str(&format!("beta_star = {}\n", fmt_f64(sl.beta_star)));
        s.push_str(&format!("gamma_star = {}\n", fmt_f64(sl.gamma_star)));

        let t = &self.time;
        s.push_str("\n[time]\n");
        s.push_str(&format!("dt = {}\n", fmt_f64(t.dt)));
        s.push_str(&format!("t_end = {}\n", fmt_f64(t.t_end)));
        s.push_str(&format!("picard_tol = {}\n", fmt_f64(t.picard_tol)));
        s.push_str(&format!("picard_max = {}\n", t.picard_max));
        s.push_str(&format!("poisson_tol = {}\n", fmt_f64(t.poisson_tol)));
        s.push_str(&format!("advection = {:?}\n", t.advection));
        s.push_str(&format!("freeze_velocity = {}\n", t.freeze_velocity));

        let f = &self.forcing;
        s.push_str("\n[forcing]\n");
        s.push_str(&format!("body_x = {}\n", fmt_f64(f.body_x)));
        s.push_str(&format!("body_y = {}\n", fmt_f64(f.body_y)));
        s.push_str(&format!("lithostatic = {}\n", fmt_f64(f.lithostatic)));
        s.push_str(&format!("pf_uniform = {}\n", fmt_f64(f.pf_uniform)));
        s.push_str(&format!("pf_pulse_amplitude = {}\n", fmt_f64(f.pf_pulse_amplitude)));
        s.push_str(&format!("pf_pulse_x = {}\n", fmt_f64(f.pf_pulse_x)));
        s.push_str(&format!("pf_pulse_y = {}\n", fmt_f64(f.pf_pulse_y)));
        s.push_str(&format!("pf_pulse_width = {}\n", fmt_f64(f.pf_pulse_width)));

        let o = &self.output;
        s.push_str("\n[output]\n");
        s.push_str(&format!("vtk_every = {}\n", o.vtk_every));
        s
    }

    /// Hex SHA-256 of the canonical echo; stable under key reordering of
    /// the input file.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_sim_config(&self) -> Result<SimConfig, String> {
        let g = &self.grid;
        if g.nx < 4 || g.ny < 4 {
            return Err(format!("grid {}x{} needs at least 4 cells per direction", g.nx, g.ny));
        }
        if g.lx <= 0.0 || g.ly <= 0.0 || !g.lx.is_finite() || !g.ly.is_finite() {
            return Err(format!("domain extents ({}, {}) must be positive", g.lx, g.ly));
        }
        let grid = Grid::new(g.nx, g.ny, g.lx, g.ly);
        let mut cfg = SimConfig::new(grid);

        let r = &self.rheology;
        cfg.rheology = RheologyParams {
            nu_star: r.nu_star,
            delta_star: r.delta_star,
            q_star: r.q_star,
            q_exponent: r.q_exponent,
            reg_n: r.reg_n,
        };
        cfg.permeability = r.permeability;
        cfg.alpha_drag = r.alpha_drag;
        cfg.density_fluid = r.density_fluid;
        cfg.porosity = if r.porosity_min == r.porosity_max {
            Porosity::Constant(r.porosity_min)
        } else {
            Porosity::Exponential {
                min: r.porosity_min,
                max: r.porosity_max,
                ref_pressure: r.porosity_ref_pressure,
            }
        };

        cfg.slip = SlipParams {
            s_star: self.slip.s_star,
            beta_star: self.slip.beta_star,
            gamma_star: self.slip.gamma_star,
        };

        let t = &self.time;
        cfg.dt = t.dt;
        cfg.t_end = t.t_end;
        cfg.picard_tol = t.picard_tol;
        cfg.picard_max = t.picard_max;
        cfg.poisson_tol = t.poisson_tol;
        cfg.advection = match t.advection.as_str() {
            "upwind" => AdvectionScheme::Upwind,
            "central" => AdvectionScheme::Central,
            other => {
                return Err(format!("advection = {other:?} must be \"upwind\" or \"central\""))
            }
        };
        cfg.freeze_velocity = t.freeze_velocity;

        let f = &self.forcing;
        cfg.body_force = if f.body_x == 0.0 && f.body_y == 0.0 {
            BodyForce::Zero
        } else {
            BodyForce::Constant { x: f.body_x, y: f.body_y }
        };
        cfg.lithostatic = Lithostatic::Constant(f.lithostatic);
        if f.pf_pulse_amplitude != 0.0
            && (f.pf_pulse_width <= 0.0 || !f.pf_pulse_width.is_finite())
        {
            return Err(format!("pf_pulse_width = {} must be > 0", f.pf_pulse_width));
        }

        cfg.validate()?;
        Ok(cfg)
    }

    /// Initial pore pressure on the configured grid: a uniform level plus
    /// an optional Gaussian pulse.
    pub fn initial_pore_pressure(&self, grid: Grid) -> ScalarField {
        let f = &self.forcing;
        if f.pf_pulse_amplitude == 0.0 {
            return ScalarField::constant(grid, f.pf_uniform);
        }
        let (amp, x0, y0, w) = (f.pf_pulse_amplitude, f.pf_pulse_x, f.pf_pulse_y, f.pf_pulse_width);
        ScalarField::from_fn(grid, |x, y| {
            let r2 = (x - x0) * (x - x0) + (y - y0) * (y - y0);
            f.pf_uniform + amp * (-r2 / (2.0 * w * w)).exp()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn an_empty_file_yields_the_documented_defaults() {
        let cfg = ConfigFile::parse("").unwrap();
        assert_eq!(cfg, ConfigFile::default());
        let sim = cfg.to_sim_config().unwrap();
        assert_eq!(sim.grid.nx, 64);
        assert_eq!(sim.dt, 1e-3);
        assert!(matches!(sim.porosity, Porosity::Constant(p) if p == 0.5));
        assert!(sim.body_force.is_zero());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ConfigFile::parse("[grid]\nnx = 8\nnz = 8\n").unwrap_err();
        assert!(err.contains("nz"), "{err}");
        let err = ConfigFile::parse("[gird]\nnx = 8\n").unwrap_err();
        assert!(err.contains("gird"), "{err}");
    }

    #[test]
    fn the_hash_ignores_key_order_but_not_values() {
        let a = ConfigFile::parse("[grid]\nnx = 16\nny = 8\n").unwrap();
        let b = ConfigFile::parse("[grid]\nny = 8\nnx = 16\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ConfigFile::parse("[grid]\nnx = 16\nny = 9\n").unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn the_canonical_echo_round_trips() {
        let text = "
            [grid]
            nx = 12
            ny = 8
            lx = 2.5
            [rheology]
            q_star = 0.3
            reg_n = 32
            [time]
            dt = 1e-4
            t_end = 1e-2
            advection = \"central\"
            [forcing]
            pf_pulse_amplitude = 1.5
        ";
        let cfg = ConfigFile::parse(text).unwrap();
        let echo = cfg.canonical_toml();
        let again = ConfigFile::parse(&echo).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
    }

    #[test]
    fn conversion_rejects_bad_values() {
        let tiny = ConfigFile::parse("[grid]\nnx = 2\n").unwrap();
        assert!(tiny.to_sim_config().unwrap_err().contains("4 cells"));

        let scheme = ConfigFile::parse("[time]\nadvection = \"quick\"\n").unwrap();
        assert!(scheme.to_sim_config().unwrap_err().contains("advection"));

        let dt = ConfigFile::parse("[time]\ndt = -1.0\n").unwrap();
        assert!(dt.to_sim_config().is_err());

        let pulse = ConfigFile::parse("[forcing]\npf_pulse_amplitude = 1.0\npf_pulse_width = 0.0\n")
            .unwrap();
        assert!(pulse.to_sim_config().unwrap_err().contains("pf_pulse_width"));
    }

    #[test]
    fn distinct_porosity_bounds_select_the_exponential_law() {
        let cfg = ConfigFile::parse(
            "[rheology]\nporosity_min = 0.3\nporosity_max = 0.6\nporosity_ref_pressure = 2.0\n",
        )
        .unwrap();
        let sim = cfg.to_sim_config().unwrap();
        assert_eq!(
            sim.porosity,
            Porosity::Exponential { min: 0.3, max: 0.6, ref_pressure: 2.0 }
        );
    }

    #[test]
    fn the_pulse_shapes_the_initial_pore_pressure() {
        let cfg = ConfigFile::parse(
            "[forcing]\npf_uniform = 1.0\npf_pulse_amplitude = 2.0\npf_pulse_width = 0.2\n",
        )
        .unwrap();
        let grid = Grid::unit(8);
        let pf = cfg.initial_pore_pressure(grid);
        let center = pf.at(4, 4);
        let corner = pf.at(0, 0);
        assert!(center > 2.5 && center < 3.0, "center {center}");
        assert!(corner > 1.0 && corner < center, "corner {corner}");

        let flat = ConfigFile::parse("[forcing]\npf_uniform = 0.7\n").unwrap();
        let pf = flat.initial_pore_pressure(grid);
        assert!(pf.data.iter().all(|&v| v == 0.7));
    }
}
