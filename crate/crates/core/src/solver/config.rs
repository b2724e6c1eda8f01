//! Simulation configuration: discretization knobs plus the analytic
//! closures (body force, lithostatic pressure, porosity, optional boundary
//! traction forcing) a run is driven by.

use crate::fields::{AdvectionScheme, Grid, ScalarField, VectorField};
use crate::rheology::{RheologyParams, SlipParams};
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(f64, f64, f64) -> (f64, f64) + Send + Sync>;

/// Body force per unit volume.
#[derive(Clone)]
pub enum BodyForce {
    Zero,
    Constant { x: f64, y: f64 },
    /// `f(t, x, y) -> (bx, by)`; used by manufactured solutions and the
    /// builtin scenarios.
    Analytic(VectorFn),
}

impl BodyForce {
    pub fn eval(&self, t: f64, x: f64, y: f64) -> (f64, f64) {
        match self {
            BodyForce::Zero => (0.0, 0.0),
            BodyForce::Constant { x: bx, y: by } => (*bx, *by),
            BodyForce::Analytic(f) => f(t, x, y),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, BodyForce::Zero)
    }

    /// Samples the components at the velocity face centers.
    pub fn sample_faces(&self, grid: Grid, t: f64) -> VectorField {
        match self {
            BodyForce::Zero => VectorField::zeros(grid),
            _ => VectorField::from_fn(
                grid,
                |x, y| self.eval(t, x, y).0,
                |x, y| self.eval(t, x, y).1,
            ),
        }
    }
}

impl std::fmt::Debug for BodyForce {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BodyForce::Zero => write!(f, "BodyForce::Zero"),
            BodyForce::Constant { x, y } => write!(f, "BodyForce::Constant({x}, {y})"),
            BodyForce::Analytic(_) => write!(f, "BodyForce::Analytic(..)"),
        }
    }
}

/// Lithostatic (solid) pressure field, given analytically.
#[derive(Clone)]
pub enum Lithostatic {
    Constant(f64),
    Analytic {
        value: ScalarFn,
        /// Time derivative, consulted only when
        /// `SimConfig::include_lithostatic_rate` is set.
        rate: Option<ScalarFn>,
    },
}

impl Lithostatic {
    pub fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
        match self {
            Lithostatic::Constant(c) => *c,
            Lithostatic::Analytic { value, .. } => value(t, x, y),
        }
    }

    pub fn sample_cells(&self, grid: Grid, t: f64) -> ScalarField {
        match self {
            Lithostatic::Constant(c) => ScalarField::constant(grid, *c),
            Lithostatic::Analytic { value, .. } => {
                ScalarField::from_fn(grid, |x, y| value(t, x, y))
            }
        }
    }

    pub fn sample_rate_cells(&self, grid: Grid, t: f64) -> ScalarField {
        match self {
            Lithostatic::Constant(_) => ScalarField::zeros(grid),
            Lithostatic::Analytic { rate, .. } => match rate {
                Some(r) => ScalarField::from_fn(grid, |x, y| r(t, x, y)),
                None => ScalarField::zeros(grid),
            },
        }
    }
}

impl std::fmt::Debug for Lithostatic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lithostatic::Constant(c) => write!(f, "Lithostatic::Constant({c})"),
            Lithostatic::Analytic { rate, .. } => {
                write!(f, "Lithostatic::Analytic {{ rate: {} }}", rate.is_some())
            }
        }
    }
}

/// Porosity as a function of effective pressure p - p_f.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Porosity {
    Constant(f64),
    /// min + (max - min) * exp(-pressure / ref_pressure), clamped to
    /// [min, max].
    Exponential { min: f64, max: f64, ref_pressure: f64 },
}

impl Porosity {
    pub fn eval(&self, effective_pressure: f64) -> f64 {
        match *self {
            Porosity::Constant(phi) => phi,
            Porosity::Exponential { min, max, ref_pressure } => {
                let phi = min + (max - min) * (-effective_pressure / ref_pressure).exp();
                phi.clamp(min, max)
            }
        }
    }
}

/// Container wall identifiers; the coordinate passed to traction closures
/// runs along the wall (x for bottom/top, y for left/right).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    Bottom,
    Top,
    Left,
    Right,
}

pub type TractionFn = Arc<dyn Fn(Wall, f64, f64) -> f64 + Send + Sync>;

/// Tangential traction forcing g in the wall condition
/// (S n)_tau = -s_n(v_tau) + g, with the tangent along +x on the bottom
/// and top walls and along +y on the left and right walls; positive g
/// always drives flow in the positive coordinate direction. The function
/// receives the wall, the time, and the arclength coordinate along the
/// wall. Zero in production runs; manufactured solutions use it to impose
/// exact wall behavior.
#[derive(Clone, Default)]
pub enum TractionForcing {
    #[default]
    None,
    Analytic(TractionFn),
}

impl TractionForcing {
    pub fn eval(&self, wall: Wall, t: f64, coord: f64) -> f64 {
        match self {
            TractionForcing::None => 0.0,
            TractionForcing::Analytic(f) => f(wall, t, coord),
        }
    }
}

impl std::fmt::Debug for TractionForcing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TractionForcing::None => write!(f, "TractionForcing::None"),
            TractionForcing::Analytic(_) => write!(f, "TractionForcing::Analytic(..)"),
        }
    }
}

/// Full configuration of a run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub grid: Grid,
    pub rheology: RheologyParams,
    pub slip: SlipParams,
    /// Fixed time-step size.
    pub dt: f64,
    pub t_end: f64,
    /// Relative velocity change at which the Picard iteration stops.
    pub picard_tol: f64,
    pub picard_max: usize,
    /// Infinity-norm target of the linear solves; also the guaranteed
    /// bound on the post-projection divergence.
    pub poisson_tol: f64,
    /// Darcy drag coefficient in the a-posteriori fluid velocity.
    pub alpha_drag: f64,
    /// Pore-pressure diffusivity.
    pub permeability: f64,
    /// Fluid density entering the pore-pressure source and Darcy flux.
    pub density_fluid: f64,
    pub porosity: Porosity,
    pub body_force: BodyForce,
    pub lithostatic: Lithostatic,
    pub traction_forcing: TractionForcing,
    pub advection: AdvectionScheme,
    /// Adds the lithostatic time derivative to the pore-pressure sources.
    pub include_lithostatic_rate: bool,
    /// Skips the momentum update entirely (pore-pressure-only runs).
    pub freeze_velocity: bool,
}

impl SimConfig {
    /// Normalized defaults on the given grid: unit densities, diffusivity
    /// and yield coefficient, Newtonian exponent, Navier slip.
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            rheology: RheologyParams::default(),
            slip: SlipParams::default(),
            dt: 1e-3,
            t_end: 1e-1,
            picard_tol: 1e-9,
            picard_max: 200,
            poisson_tol: 1e-10,
            alpha_drag: 1.0,
            permeability: 1.0,
            density_fluid: 1.0,
            porosity: Porosity::Constant(0.5),
            body_force: BodyForce::Zero,
            lithostatic: Lithostatic::Constant(0.0),
            traction_forcing: TractionForcing::None,
            advection: AdvectionScheme::Upwind,
            include_lithostatic_rate: false,
            freeze_velocity: false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.rheology.validate().map_err(|e| e.to_string())?;
        self.slip.validate().map_err(|e| e.to_string())?;
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(format!("dt = {} must be > 0", self.dt));
        }
        if !self.t_end.is_finite() || self.t_end < self.dt {
            return Err(format!("t_end = {} must be >= dt = {}", self.t_end, self.dt));
        }
        if !self.picard_tol.is_finite() || self.picard_tol <= 0.0 {
            return Err("picard_tol must be > 0".into());
        }
        if self.picard_max < 1 {
            return Err("picard_max must be >= 1".into());
        }
        if !self.poisson_tol.is_finite() || self.poisson_tol <= 0.0 {
            return Err("poisson_tol must be > 0".into());
        }
        if !self.alpha_drag.is_finite() || self.alpha_drag <= 0.0 {
            return Err("alpha_drag must be > 0".into());
        }
        if !self.permeability.is_finite() || self.permeability <= 0.0 {
            return Err("permeability must be > 0".into());
        }
        if !self.density_fluid.is_finite() || self.density_fluid < 0.0 {
            return Err("density_fluid must be >= 0".into());
        }
        match self.porosity {
            Porosity::Constant(phi) => {
                if !(0.0..=1.0).contains(&phi) {
                    return Err(format!("porosity = {phi} must lie in [0, 1]"));
                }
            }
            Porosity::Exponential { min, max, ref_pressure } => {
                if !(0.0 <= min && min <= max && max <= 1.0) {
                    return Err(format!(
                        "porosity bounds ({min}, {max}) must satisfy 0 <= min <= max <= 1"
                    ));
                }
                if !ref_pressure.is_finite() || ref_pressure <= 0.0 {
                    return Err("porosity ref_pressure must be > 0".into());
                }
            }
        }
        Ok(())
    }

    /// Number of fixed-size steps covering [0, t_end].
    pub fn step_count(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }
}
