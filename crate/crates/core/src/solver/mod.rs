//! Time integration: projection-based momentum update with yield stress
//! and wall slip, implicit pore-pressure diffusion, and the step driver.

pub mod cg;
pub mod config;
pub mod momentum;
pub mod porepressure;
pub mod projection;
pub mod state;
pub mod stepper;

pub use config::{BodyForce, Lithostatic, Porosity, SimConfig, TractionForcing, Wall};
pub use momentum::momentum_step;
pub use porepressure::{fluid_velocity, pore_pressure_step};
pub use projection::leray_project;
pub use state::SimState;
pub use stepper::{simulate, Observer, StepContext, StepWarning};

/// Failure modes of the time integrator. Linear-solve and Picard failures
/// carry the last residual so callers can report how far the iteration got.
#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error(
        "{label} solve stalled after {iterations} iterations \
         (residual {residual:.3e}, tolerance {tol:.3e})"
    )]
    LinearSolve { label: &'static str, iterations: usize, residual: f64, tol: f64 },

    #[error(
        "momentum iteration did not converge in {iterations} sweeps \
         (relative update {residual:.3e}, tolerance {tol:.3e})"
    )]
    PicardNoConvergence { iterations: usize, residual: f64, tol: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("step {step} (t = {t:.6e}): {source}")]
    AtStep {
        step: usize,
        t: f64,
        #[source]
        source: Box<SolverError>,
    },
}

impl SolverError {
    pub(crate) fn at_step(self, step: usize, t: f64) -> SolverError {
        SolverError::AtStep { step, t, source: Box::new(self) }
    }
}
