//! Pore-pressure transport and the a-posteriori fluid velocity.
//!
//! The pore pressure obeys an advection-diffusion balance driven by the
//! body force and by changes of the lithostatic pressure along particle
//! paths:
//!
//!   (p_f+ - p_f)/dt + v.grad(p_f)
//!       = K lap(p_f+) - K rho_f div(b) + v.grad(p_s) + dp_s/dt.
//!
//! Diffusion is backward Euler (the stiff part), everything else explicit.
//! The wall condition is the natural no-flux one for the combined Darcy
//! flux, (grad p_f - rho_f b).n = 0: the Laplacian drops the wall gradient
//! and the body-force divergence is taken with its wall-normal components
//! zeroed, so the discrete source sums to zero and pore-pressure mass is
//! conserved exactly.

use super::cg::conjugate_gradient;
use super::config::SimConfig;
use super::{SimState, SolverError};
use crate::fields::{advect_scalar, divergence, gradient_to_faces, laplacian_neumann};
use crate::fields::{ScalarField, VectorField};

/// Advances p_f to t + dt; v and p are carried through unchanged.
pub fn pore_pressure_step(state: &SimState, cfg: &SimConfig) -> Result<SimState, SolverError> {
    let g = cfg.grid;
    crate::fields::assert_same_grid(g, state.p_f.grid);
    let dt = cfg.dt;
    let t_new = state.t + dt;
    let kappa = cfg.permeability;

    let adv = advect_scalar(&state.p_f, &state.v, cfg.advection);

    let mut body = cfg.body_force.sample_faces(g, t_new);
    body.enforce_no_penetration();
    let div_b = divergence(&body);

    let p_s = cfg.lithostatic.sample_cells(g, t_new);
    let adv_ps = advect_scalar(&p_s, &state.v, cfg.advection);

    let mut rhs = vec![0.0; g.cell_count()];
    for c in 0..g.cell_count() {
        rhs[c] = state.p_f.data[c] / dt - adv.data[c] - kappa * cfg.density_fluid * div_b.data[c]
            + adv_ps.data[c];
    }
    if cfg.include_lithostatic_rate {
        let rate = cfg.lithostatic.sample_rate_cells(g, t_new);
        for c in 0..g.cell_count() {
            rhs[c] += rate.data[c];
        }
    }

    let apply = |x: &[f64], out: &mut [f64]| {
        let mut f = ScalarField::zeros(g);
        f.data.copy_from_slice(x);
        let lap = laplacian_neumann(&f);
        for c in 0..x.len() {
            out[c] = x[c] / dt - kappa * lap.data[c];
        }
    };

    let scale = rhs.iter().fold(0.0f64, |m, &r| m.max(r.abs()));
    let tol = (1e-12 * scale).max(1e-306);
    let mut p_new = state.p_f.clone();
    conjugate_gradient("pore pressure", apply, &rhs, &mut p_new.data, None, false, tol)?;

    Ok(SimState { t: t_new, v: state.v.clone(), p: state.p.clone(), p_f: p_new })
}

/// Reconstructed fluid velocity on the faces:
/// v_f = v - (porosity/alpha) (grad p_f - rho_f b).
///
/// Purely diagnostic; nothing feeds back into the evolution. Boundary
/// normal components are zero by the no-flux wall condition.
pub fn fluid_velocity(state: &SimState, cfg: &SimConfig) -> VectorField {
    let g = cfg.grid;
    let grad_pf = gradient_to_faces(&state.p_f);
    let mut body = cfg.body_force.sample_faces(g, state.t);
    body.enforce_no_penetration();

    let mut out = VectorField::zeros(g);
    for j in 0..g.ny {
        for i in 1..g.nx {
            let f = g.u_face_idx(i, j);
            let cl = g.cell_idx(i - 1, j);
            let cr = g.cell_idx(i, j);
            let pe = 0.5 * (state.p.data[cl] + state.p.data[cr])
                - 0.5 * (state.p_f.data[cl] + state.p_f.data[cr]);
            let phi = cfg.porosity.eval(pe);
            out.u[f] = state.v.u[f]
                - phi / cfg.alpha_drag * (grad_pf.u[f] - cfg.density_fluid * body.u[f]);
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let f = g.v_face_idx(i, j);
            let cb = g.cell_idx(i, j - 1);
            let ct = g.cell_idx(i, j);
            let pe = 0.5 * (state.p.data[cb] + state.p.data[ct])
                - 0.5 * (state.p_f.data[cb] + state.p_f.data[ct]);
            let phi = cfg.porosity.eval(pe);
            out.v[f] = state.v.v[f]
                - phi / cfg.alpha_drag * (grad_pf.v[f] - cfg.density_fluid * body.v[f]);
        }
    }
    out
}
