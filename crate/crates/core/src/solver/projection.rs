//! Projection onto discrete divergence-free fields.
//!
//! Solves the pure-Neumann Poisson problem lap(psi) = div(w) and subtracts
//! grad(psi) from the interior faces. Because the discrete Laplacian is
//! exactly the divergence of the face gradient, the divergence of the
//! projected field equals the linear-solve residual entry by entry: the CG
//! stopping tolerance IS the divergence bound, no separate estimate needed.

use super::cg::conjugate_gradient;
use super::SolverError;
use crate::fields::{divergence, gradient_to_faces, laplacian_neumann};
use crate::fields::{ScalarField, VectorField};

/// Projects `w` (which must satisfy w.n = 0 on the boundary) and returns
/// the divergence-free field together with the zero-mean potential psi.
///
/// `warm` seeds the CG iteration, typically with the previous step's
/// potential. The infinity norm of div of the result is at most `tol_inf`.
pub fn leray_project(
    w: &VectorField,
    tol_inf: f64,
    warm: Option<&ScalarField>,
) -> Result<(VectorField, ScalarField), SolverError> {
    let grid = w.grid;
    assert_eq!(
        w.max_boundary_normal(),
        0.0,
        "projection requires exact no-penetration input"
    );

    let div = divergence(w);
    // CG solves the positive-definite form -lap(psi) = -div(w).
    let rhs: Vec<f64> = div.data.iter().map(|d| -d).collect();

    let mut psi = ScalarField::zeros(grid);
    if let Some(seed) = warm {
        crate::fields::assert_same_grid(grid, seed.grid);
        psi.data.copy_from_slice(&seed.data);
    }

    let apply = |x: &[f64], out: &mut [f64]| {
        let mut f = ScalarField::zeros(grid);
        f.data.copy_from_slice(x);
        let lap = laplacian_neumann(&f);
        for (o, l) in out.iter_mut().zip(lap.data.iter()) {
            *o = -l;
        }
    };

    conjugate_gradient("pressure projection", apply, &rhs, &mut psi.data, None, true, tol_inf)?;

    let grad = gradient_to_faces(&psi);
    let mut v = w.clone();
    for (u, g) in v.u.iter_mut().zip(grad.u.iter()) {
        *u -= g;
    }
    for (vv, g) in v.v.iter_mut().zip(grad.v.iter()) {
        *vv -= g;
    }
    // grad psi vanishes on boundary faces, so w.n = 0 survives exactly.
    Ok((v, psi))
}
