//! Evolved unknowns of a run.

use crate::fields::{Grid, ScalarField, VectorField};

/// Discrete state at one time level: staggered velocity, cell-centered
/// total pressure and pore pressure.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub v: VectorField,
    /// Total pressure. Determined up to a constant; the solver keeps it
    /// zero-mean.
    pub p: ScalarField,
    pub p_f: ScalarField,
}

impl SimState {
    /// State at rest with the given pore pressure.
    pub fn quiescent(grid: Grid, p_f: ScalarField) -> Self {
        assert_eq!(grid, p_f.grid, "pore pressure lives on a different grid");
        Self { t: 0.0, v: VectorField::zeros(grid), p: ScalarField::zeros(grid), p_f }
    }

    pub fn grid(&self) -> Grid {
        self.v.grid
    }
}
