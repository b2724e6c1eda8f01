//! Implicit momentum update.
//!
//! Each step advances the coupled backward-Euler balance
//!
//!   (v+ - v)/dt + conv(v) = div S(v+) - grad p+ + b,   div v+ = 0,
//!
//! by Picard sweeps. Within a sweep the Newtonian part of the stress is
//! implicit and everything else is a frozen defect:
//!
//!   w/dt - div(2 nu* D w) + wall rows
//!       = v/dt - conv - grad p_k + b + div[S(v^k) - 2 nu* D v^k],
//!
//! after which the iterate is projected and the pressure corrected in
//! rotational incremental form, p += psi/dt - nu* div w. Projecting inside
//! the loop makes the converged state satisfy the momentum balance, the
//! divergence constraint and the wall law at once; a single projection
//! after the loop would leave its tangential kick in the wall speeds,
//! which is exactly the quantity the slip threshold constrains.
//!
//! The implicit operator couples u and v through the mixed shear and is
//! assembled in flux form: normal stresses 2 nu* du/dx and 2 nu* dv/dy at
//! cell centers, the shear nu* (du/dy + dv/dx) at interior grid nodes.
//! Wall nodes carry no viscous shear; the natural boundary condition
//! replaces that flux with the slip traction
//!
//!   (S n)_tau = -s_n(v_tau) + g,
//!
//! oriented along +x on the bottom and top walls and +y on the left and
//! right walls, so positive forcing g always drives flow in the positive
//! coordinate direction. The wall speed is extrapolated from the two face
//! rows nearest the wall, w_w = 1.5 near - 0.5 far, and the traction acts
//! back through the same weights, which keeps the operator symmetric.
//!
//! The slip law s_n is relinearized every sweep. The tangent slope at the
//! current wall speed (from [`slip_tangent`]) converges quadratically on a
//! fixed branch, but at large reg_n the law is nearly a step function: a
//! tangent taken on the sliding shoulder degenerates to a constant
//! traction, and when that traction exceeds what the adjacent flow can
//! balance, the wall speed flips sign sweep after sweep. A node whose
//! speed flips is therefore pinned (linearization point zero, a stiff
//! stick trial), and the constraint force the pin measures selects the
//! branch and the point at which the node is released. All slopes are
//! nonnegative, so the operator stays symmetric positive definite.
//!
//! At nu* = 1/2 and q = 2 the defect reduces to the plastic stress alone,
//! and for a Newtonian material it vanishes identically, making the sweep
//! exact. The plastic branch has Lipschitz slope up to tau reg_n, so the
//! sweep contracts only while dt tau reg_n 8/h^2 stays below one;
//! configurations violating that surface as PicardNoConvergence rather
//! than silent garbage.
//!
//! The linear systems are solved by [`conjugate_gradient_pc`] with a block
//! Jacobi preconditioner that inverts each wall face pair exactly; the
//! penalty rows defeat both pointwise scaling and absolute residual
//! tolerances once the slip slope reaches ~1e12.

use super::cg::conjugate_gradient_pc;
use super::config::{SimConfig, Wall};
use super::projection::leray_project;
use super::{SimState, SolverError};
use crate::fields::{convective_term_truncated, divergence, gradient_to_faces, sym_gradient};
use crate::fields::{Grid, ScalarField, VectorField};
use crate::rheology::{slip_coefficient, slip_tangent, total_stress, SlipParams};

#[derive(Debug, Clone, Copy)]
pub(crate) struct MomentumDiag {
    pub picard_sweeps: usize,
    pub picard_residual: f64,
}

/// Tangential wall velocities, one entry per boundary node along each wall,
/// extrapolated from the two nearest face rows (exact for fields linear in
/// the wall-normal coordinate).
pub(crate) struct WallSpeeds {
    pub(crate) bottom: Vec<f64>,
    pub(crate) top: Vec<f64>,
    pub(crate) left: Vec<f64>,
    pub(crate) right: Vec<f64>,
}

pub(crate) fn wall_speeds(w: &VectorField) -> WallSpeeds {
    let g = w.grid;
    let ex = |near: f64, far: f64| 1.5 * near - 0.5 * far;
    let mut bottom = vec![0.0; g.nx + 1];
    let mut top = vec![0.0; g.nx + 1];
    for i in 0..=g.nx {
        bottom[i] = ex(w.u[g.u_face_idx(i, 0)], w.u[g.u_face_idx(i, 1)]);
        top[i] = ex(w.u[g.u_face_idx(i, g.ny - 1)], w.u[g.u_face_idx(i, g.ny - 2)]);
    }
    let mut left = vec![0.0; g.ny + 1];
    let mut right = vec![0.0; g.ny + 1];
    for j in 0..=g.ny {
        left[j] = ex(w.v[g.v_face_idx(0, j)], w.v[g.v_face_idx(1, j)]);
        right[j] = ex(w.v[g.v_face_idx(g.nx - 1, j)], w.v[g.v_face_idx(g.nx - 2, j)]);
    }
    WallSpeeds { bottom, top, left, right }
}

fn node_idx(g: Grid, i: usize, j: usize) -> usize {
    j * (g.nx + 1) + i
}

/// Per-node linear model of the slip traction, slope * w + offset, with
/// the forcing g minus the offset folded into `drive` on the right-hand
/// side. Any nonnegative slope leaves the fixed point unchanged because
/// the offset is recomputed from the same point each sweep.
struct WallNode {
    s_hat: f64,
    slope: f64,
    offset: f64,
    drive: f64,
}

fn model_at(s_hat: f64, g_force: f64, slip: &SlipParams, reg_n: u64) -> WallNode {
    let slope = slip_tangent(s_hat.abs(), slip, reg_n);
    let traction = slip_coefficient(s_hat.abs(), slip, reg_n) * s_hat;
    let offset = traction - slope * s_hat;
    WallNode { s_hat, slope, offset, drive: g_force - offset }
}

/// Chooses the next linearization point from the previous model and the
/// wall speed it produced. Tangent relinearization alone stalls twice:
/// a shoulder tangent acts as constant traction and flips the speed across
/// the regularization layer every sweep, and a pinned node has to be
/// released on the branch its constraint force selects. That force is
/// read off the previous linear model at its own solution, lam = slope * w
/// + offset, the one place the surrounding flow's resistance is visible.
fn next_lin_point(prev: &WallNode, w: f64, slip: &SlipParams, reg_n: u64) -> f64 {
    if prev.s_hat != 0.0 {
        if w * prev.s_hat < 0.0 {
            // Sign flip: the root hides in the layer the tangent stepped
            // over. Pin the node; the measured force re-releases it.
            return 0.0;
        }
        return w;
    }
    let lam = prev.slope * w + prev.offset;
    if slip.s_star <= 0.0 {
        return w;
    }
    if lam.abs() < slip.s_star {
        // Stick: solve s* v / (v + 1/n) = lam for the layer-scale root.
        let margin = (slip.s_star - lam.abs()).max(1e-9 * slip.s_star);
        let mut pred = lam.abs() / (reg_n as f64 * margin);
        if slip.beta_star > 0.0 {
            pred = pred.min(slip.beta_star);
        }
        pred.copysign(lam)
    } else if slip.gamma_star > 0.0 {
        // Slide: invert the affine drag branch.
        (slip.beta_star + (lam.abs() - slip.s_star) / slip.gamma_star).copysign(lam)
    } else {
        // Drag-free wall past its threshold has no finite root; any point
        // far outside the layer models the constant traction correctly.
        (slip.beta_star + 1.0).copysign(lam)
    }
}

fn wall_model(
    nodes: &mut Vec<WallNode>,
    speeds: &[f64],
    wall: Wall,
    h_along: f64,
    cfg: &SimConfig,
    t_new: f64,
    first: bool,
) {
    let slip = &cfg.slip;
    let reg_n = cfg.rheology.reg_n;
    if first {
        nodes.clear();
        for (k, &s) in speeds.iter().enumerate() {
            let g_force = cfg.traction_forcing.eval(wall, t_new, k as f64 * h_along);
            nodes.push(model_at(s, g_force, slip, reg_n));
        }
    } else {
        for (k, &w) in speeds.iter().enumerate() {
            let g_force = cfg.traction_forcing.eval(wall, t_new, k as f64 * h_along);
            let s_hat = next_lin_point(&nodes[k], w, slip, reg_n);
            nodes[k] = model_at(s_hat, g_force, slip, reg_n);
        }
    }
}

/// Cell-centered shear averaged onto interior grid nodes. Wall nodes stay
/// zero: the defect stress carries no boundary flux, all wall physics
/// lives in the linearized traction rows.
fn cell_shear_to_nodes(g: Grid, s_xy: &[f64]) -> Vec<f64> {
    let (nx, ny) = (g.nx, g.ny);
    let mut s12 = vec![0.0; (nx + 1) * (ny + 1)];
    for j in 1..ny {
        for i in 1..nx {
            s12[node_idx(g, i, j)] = 0.25
                * (s_xy[g.cell_idx(i - 1, j - 1)]
                    + s_xy[g.cell_idx(i, j - 1)]
                    + s_xy[g.cell_idx(i - 1, j)]
                    + s_xy[g.cell_idx(i, j)]);
        }
    }
    s12
}

/// Face-centered divergence of the deviatoric stress: normal components
/// differenced between cells, shear differenced between nodes.
fn stress_divergence(g: Grid, s_xx: &[f64], s_yy: &[f64], s12_nodes: &[f64]) -> VectorField {
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = VectorField::zeros(g);
    for j in 0..ny {
        for i in 1..nx {
            out.u[g.u_face_idx(i, j)] = (s_xx[g.cell_idx(i, j)] - s_xx[g.cell_idx(i - 1, j)]) / hx
                + (s12_nodes[node_idx(g, i, j + 1)] - s12_nodes[node_idx(g, i, j)]) / hy;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            out.v[g.v_face_idx(i, j)] = (s_yy[g.cell_idx(i, j)] - s_yy[g.cell_idx(i, j - 1)]) / hy
                + (s12_nodes[node_idx(g, i + 1, j)] - s12_nodes[node_idx(g, i, j)]) / hx;
        }
    }
    out
}

/// Matrix-free application of w/dt - div(2 nu D w) plus the linearized
/// wall traction, acting on the concatenated [u; v] face values. Pinned
/// normal faces are hard zeros; their rows stay zero and every CG iterate
/// keeps them at zero, so reading them as ordinary neighbors is exact.
struct ViscousOperator {
    g: Grid,
    inv_dt: f64,
    nu: f64,
    slope_b: Vec<f64>,
    slope_t: Vec<f64>,
    slope_l: Vec<f64>,
    slope_r: Vec<f64>,
    sxx: Vec<f64>,
    syy: Vec<f64>,
    s12: Vec<f64>,
}

impl ViscousOperator {
    fn new(g: Grid, dt: f64, nu: f64, lin: [&[WallNode]; 4]) -> Self {
        let slopes = |l: &[WallNode]| l.iter().map(|w| w.slope).collect::<Vec<f64>>();
        ViscousOperator {
            g,
            inv_dt: 1.0 / dt,
            nu,
            slope_b: slopes(lin[0]),
            slope_t: slopes(lin[1]),
            slope_l: slopes(lin[2]),
            slope_r: slopes(lin[3]),
            sxx: vec![0.0; g.cell_count()],
            syy: vec![0.0; g.cell_count()],
            // Wall rows of the scratch are never written and stay zero.
            s12: vec![0.0; (g.nx + 1) * (g.ny + 1)],
        }
    }

    fn apply(&mut self, x: &[f64], out: &mut [f64]) {
        let g = self.g;
        let (nx, ny) = (g.nx, g.ny);
        let (hx, hy) = (g.hx(), g.hy());
        let nu = self.nu;
        let row = nx + 1;
        let n_u = g.u_face_count();
        let (xu, xv) = x.split_at(n_u);
        let (ou, ov) = out.split_at_mut(n_u);

        for j in 0..ny {
            for i in 0..nx {
                let c = j * nx + i;
                self.sxx[c] = 2.0 * nu * (xu[j * row + i + 1] - xu[j * row + i]) / hx;
                self.syy[c] = 2.0 * nu * (xv[(j + 1) * nx + i] - xv[j * nx + i]) / hy;
            }
        }
        for j in 1..ny {
            for i in 1..nx {
                self.s12[j * row + i] = nu
                    * ((xu[j * row + i] - xu[(j - 1) * row + i]) / hy
                        + (xv[j * nx + i] - xv[j * nx + i - 1]) / hx);
            }
        }

        ou.fill(0.0);
        ov.fill(0.0);
        for j in 0..ny {
            for i in 1..nx {
                let f = j * row + i;
                let mut val = xu[f] * self.inv_dt
                    - (self.sxx[j * nx + i] - self.sxx[j * nx + i - 1]) / hx
                    - (self.s12[(j + 1) * row + i] - self.s12[j * row + i]) / hy;
                if j < 2 {
                    let w = 1.5 * xu[i] - 0.5 * xu[row + i];
                    let c = self.slope_b[i] * w / hy;
                    val += if j == 0 { 1.5 * c } else { -0.5 * c };
                }
                if j >= ny - 2 {
                    let w = 1.5 * xu[(ny - 1) * row + i] - 0.5 * xu[(ny - 2) * row + i];
                    let c = self.slope_t[i] * w / hy;
                    val += if j == ny - 1 { 1.5 * c } else { -0.5 * c };
                }
                ou[f] = val;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let f = j * nx + i;
                let mut val = xv[f] * self.inv_dt
                    - (self.syy[j * nx + i] - self.syy[(j - 1) * nx + i]) / hy
                    - (self.s12[j * row + i + 1] - self.s12[j * row + i]) / hx;
                if i < 2 {
                    let w = 1.5 * xv[j * nx] - 0.5 * xv[j * nx + 1];
                    let c = self.slope_l[j] * w / hx;
                    val += if i == 0 { 1.5 * c } else { -0.5 * c };
                }
                if i >= nx - 2 {
                    let w = 1.5 * xv[j * nx + nx - 1] - 0.5 * xv[j * nx + nx - 2];
                    let c = self.slope_r[j] * w / hx;
                    val += if i == nx - 1 { 1.5 * c } else { -0.5 * c };
                }
                ov[f] = val;
            }
        }
    }
}

struct PairInverse {
    near: usize,
    far: usize,
    m00: f64,
    m01: f64,
    m11: f64,
}

/// Reciprocal diagonal plus exact 2x2 inverses on the wall face pairs.
/// A slip slope c contributes the rank-one pattern
/// c (1.5 near - 0.5 far)^2 / h to the pair; pointwise scaling by the
/// resulting huge diagonals crushes the complementary direction
/// (0.5, 1.5) by a factor ~c, leaving the preconditioned system as badly
/// conditioned as the raw one. Inverting the pair exactly removes both
/// the stiff and the near-null direction at once.
struct BlockJacobi {
    inv_diag: Vec<f64>,
    pairs: Vec<PairInverse>,
}

impl BlockJacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, &ri), &di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
        for p in &self.pairs {
            let (rn, rf) = (r[p.near], r[p.far]);
            z[p.near] = p.m00 * rn + p.m01 * rf;
            z[p.far] = p.m01 * rn + p.m11 * rf;
        }
    }
}

fn pair_inverse(diag: &[f64], near: usize, far: usize, k: f64) -> PairInverse {
    let (d0, d1) = (diag[near], diag[far]);
    let det = d0 * d1 - k * k;
    debug_assert!(det > 0.0, "wall pair block lost definiteness");
    PairInverse { near, far, m00: d1 / det, m01: -k / det, m11: d0 / det }
}

fn build_preconditioner(op: &ViscousOperator) -> BlockJacobi {
    let g = op.g;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let (hx2, hy2) = (hx * hx, hy * hy);
    let nu = op.nu;
    let n_u = g.u_face_count();
    let mut diag = vec![1.0; n_u + g.v_face_count()];

    for j in 0..ny {
        for i in 1..nx {
            let mut dgn = op.inv_dt + 4.0 * nu / hx2;
            if j >= 1 {
                dgn += nu / hy2;
            }
            if j <= ny - 2 {
                dgn += nu / hy2;
            }
            if j == 0 {
                dgn += 2.25 * op.slope_b[i] / hy;
            }
            if j == 1 {
                dgn += 0.25 * op.slope_b[i] / hy;
            }
            if j == ny - 1 {
                dgn += 2.25 * op.slope_t[i] / hy;
            }
            if j == ny - 2 {
                dgn += 0.25 * op.slope_t[i] / hy;
            }
            diag[g.u_face_idx(i, j)] = dgn;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let mut dgn = op.inv_dt + 4.0 * nu / hy2;
            if i >= 1 {
                dgn += nu / hx2;
            }
            if i <= nx - 2 {
                dgn += nu / hx2;
            }
            if i == 0 {
                dgn += 2.25 * op.slope_l[j] / hx;
            }
            if i == 1 {
                dgn += 0.25 * op.slope_l[j] / hx;
            }
            if i == nx - 1 {
                dgn += 2.25 * op.slope_r[j] / hx;
            }
            if i == nx - 2 {
                dgn += 0.25 * op.slope_r[j] / hx;
            }
            diag[n_u + g.v_face_idx(i, j)] = dgn;
        }
    }

    // The grid guarantees nx, ny >= 4, so no face belongs to two pairs.
    let mut pairs = Vec::with_capacity(2 * (nx - 1) + 2 * (ny - 1));
    for i in 1..nx {
        let k_b = -0.75 * op.slope_b[i] / hy - nu / hy2;
        pairs.push(pair_inverse(&diag, g.u_face_idx(i, 0), g.u_face_idx(i, 1), k_b));
        let k_t = -0.75 * op.slope_t[i] / hy - nu / hy2;
        pairs.push(pair_inverse(&diag, g.u_face_idx(i, ny - 1), g.u_face_idx(i, ny - 2), k_t));
    }
    for j in 1..ny {
        let k_l = -0.75 * op.slope_l[j] / hx - nu / hx2;
        pairs.push(pair_inverse(&diag, n_u + g.v_face_idx(0, j), n_u + g.v_face_idx(1, j), k_l));
        let k_r = -0.75 * op.slope_r[j] / hx - nu / hx2;
        pairs.push(pair_inverse(
            &diag,
            n_u + g.v_face_idx(nx - 1, j),
            n_u + g.v_face_idx(nx - 2, j),
            k_r,
        ));
    }

    for d in diag.iter_mut() {
        *d = 1.0 / *d;
    }
    BlockJacobi { inv_diag: diag, pairs }
}

/// One momentum step: advances v and p to t + dt, leaves p_f untouched.
/// Requires exact no-penetration on the incoming velocity.
pub fn momentum_step(state: &SimState, cfg: &SimConfig) -> Result<SimState, SolverError> {
    let mut warm = None;
    momentum_step_with(state, cfg, &mut warm).map(|(s, _)| s)
}

pub(crate) fn momentum_step_with(
    state: &SimState,
    cfg: &SimConfig,
    psi_warm: &mut Option<ScalarField>,
) -> Result<(SimState, MomentumDiag), SolverError> {
    let g = cfg.grid;
    crate::fields::assert_same_grid(g, state.v.grid);
    assert_eq!(
        state.v.max_boundary_normal(),
        0.0,
        "momentum step requires exact no-penetration (enforce_no_penetration first)"
    );

    let dt = cfg.dt;
    let t_new = state.t + dt;
    let nu = cfg.rheology.nu_star;
    let two_nu = 2.0 * nu;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());

    // Frozen explicit part of the right-hand side; the pressure gradient
    // is added per sweep because the pressure is corrected in the loop.
    let conv = convective_term_truncated(&state.v, cfg.rheology.reg_n);
    let body = cfg.body_force.sample_faces(g, t_new);
    let p_s = cfg.lithostatic.sample_cells(g, t_new);

    let mut rhs0 = VectorField::zeros(g);
    for f in 0..g.u_face_count() {
        rhs0.u[f] = state.v.u[f] / dt - conv.u[f] + body.u[f];
    }
    for f in 0..g.v_face_count() {
        rhs0.v[f] = state.v.v[f] / dt - conv.v[f] + body.v[f];
    }
    rhs0.enforce_no_penetration();

    let cells = g.cell_count();
    let mut e_xx = vec![0.0; cells];
    let mut e_yy = vec![0.0; cells];
    let mut e_xy = vec![0.0; cells];

    let n_u = g.u_face_count();
    // Pinned rows of rhs and x are never written and stay exactly zero.
    let mut rhs = vec![0.0; n_u + g.v_face_count()];
    let mut x = vec![0.0; n_u + g.v_face_count()];
    x[..n_u].copy_from_slice(&state.v.u);
    x[n_u..].copy_from_slice(&state.v.v);

    // Two orders tighter than the sweep tolerance, so linear solver noise
    // cannot stall the nonlinear update metric; floored because the stiff
    // wall rows put ~1e-9 of unremovable rounding into the relative
    // preconditioned residual.
    let cg_rel = (0.01 * cfg.picard_tol).clamp(1e-12, 1e-2);

    let mut vk = state.v.clone();
    // Wall speeds the next sweep linearizes against. These are taken from
    // the unprojected solution of each linear system: the constraint force
    // slope * w + offset is only meaningful at the system's own solution,
    // and a projection kick through a stick slope ~1e12 would read as a
    // phantom sliding force. At the coupled fixed point the projection
    // correction vanishes, so both fields agree there.
    let mut speeds_lin = wall_speeds(&vk);
    let mut p_cur = state.p.clone();
    let mut lin_b: Vec<WallNode> = Vec::new();
    let mut lin_t: Vec<WallNode> = Vec::new();
    let mut lin_l: Vec<WallNode> = Vec::new();
    let mut lin_r: Vec<WallNode> = Vec::new();
    let mut diag = MomentumDiag { picard_sweeps: 0, picard_residual: f64::INFINITY };

    loop {
        diag.picard_sweeps += 1;

        // Defect stress: the full constitutive law minus the implicit
        // Newtonian part. Vanishes bitwise for an unyielded Newtonian
        // material at q = 2, so that case converges in two sweeps.
        let d = sym_gradient(&vk);
        for j in 0..ny {
            for i in 0..nx {
                let c = g.cell_idx(i, j);
                let dc = d.at(i, j);
                let split = total_stress(dc, state.p_f.data[c], p_s.data[c], &cfg.rheology);
                e_xx[c] = split.total.xx - two_nu * dc.xx;
                e_yy[c] = split.total.yy - two_nu * dc.yy;
                e_xy[c] = split.total.xy - two_nu * dc.xy;
            }
        }
        let s12n = cell_shear_to_nodes(g, &e_xy);
        let flux = stress_divergence(g, &e_xx, &e_yy, &s12n);

        let first = diag.picard_sweeps == 1;
        wall_model(&mut lin_b, &speeds_lin.bottom, Wall::Bottom, hx, cfg, t_new, first);
        wall_model(&mut lin_t, &speeds_lin.top, Wall::Top, hx, cfg, t_new, first);
        wall_model(&mut lin_l, &speeds_lin.left, Wall::Left, hy, cfg, t_new, first);
        wall_model(&mut lin_r, &speeds_lin.right, Wall::Right, hy, cfg, t_new, first);

        let grad_p = gradient_to_faces(&p_cur);
        for j in 0..ny {
            for i in 1..nx {
                let f = g.u_face_idx(i, j);
                let mut r = rhs0.u[f] - grad_p.u[f] + flux.u[f];
                if j == 0 {
                    r += 1.5 * lin_b[i].drive / hy;
                }
                if j == 1 {
                    r -= 0.5 * lin_b[i].drive / hy;
                }
                if j == ny - 1 {
                    r += 1.5 * lin_t[i].drive / hy;
                }
                if j == ny - 2 {
                    r -= 0.5 * lin_t[i].drive / hy;
                }
                rhs[f] = r;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let f = g.v_face_idx(i, j);
                let mut r = rhs0.v[f] - grad_p.v[f] + flux.v[f];
                if i == 0 {
                    r += 1.5 * lin_l[j].drive / hx;
                }
                if i == 1 {
                    r -= 0.5 * lin_l[j].drive / hx;
                }
                if i == nx - 1 {
                    r += 1.5 * lin_r[j].drive / hx;
                }
                if i == nx - 2 {
                    r -= 0.5 * lin_r[j].drive / hx;
                }
                rhs[n_u + f] = r;
            }
        }

        let mut op = ViscousOperator::new(g, dt, nu, [&lin_b, &lin_t, &lin_l, &lin_r]);
        let pc = build_preconditioner(&op);
        conjugate_gradient_pc(
            "momentum",
            |xin, out| op.apply(xin, out),
            |r, z| pc.apply(r, z),
            &rhs,
            &mut x,
            cg_rel,
        )?;

        let mut v_hat = VectorField::zeros(g);
        v_hat.u.copy_from_slice(&x[..n_u]);
        v_hat.v.copy_from_slice(&x[n_u..]);
        speeds_lin = wall_speeds(&v_hat);

        // Project and correct the pressure, unless this iterate is already
        // inside the divergence budget (re-projecting then would only add
        // a stale potential).
        let div_hat = divergence(&v_hat);
        if div_hat.linf_norm() > 0.5 * cfg.poisson_tol {
            let (vp, psi) = leray_project(&v_hat, 0.5 * cfg.poisson_tol, psi_warm.as_ref())?;
            // The nu* div w term is the rotational pressure correction; it
            // removes the pressure error of a viscous-stiff mode in one
            // sweep instead of stalling at contraction ~1.
            for c in 0..cells {
                p_cur.data[c] += psi.data[c] / dt - nu * div_hat.data[c];
            }
            *psi_warm = Some(psi);
            v_hat = vp;
        }

        // Relative infinity-norm change of the projected iterate.
        let mut dmax = 0.0f64;
        let mut scale = 0.0f64;
        for (a, b) in v_hat.u.iter().zip(vk.u.iter()) {
            dmax = dmax.max((a - b).abs());
            scale = scale.max(a.abs());
        }
        for (a, b) in v_hat.v.iter().zip(vk.v.iter()) {
            dmax = dmax.max((a - b).abs());
            scale = scale.max(a.abs());
        }
        vk = v_hat;
        x[..n_u].copy_from_slice(&vk.u);
        x[n_u..].copy_from_slice(&vk.v);
        diag.picard_residual = if scale > 0.0 {
            dmax / scale
        } else if dmax == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };

        if diag.picard_residual <= cfg.picard_tol {
            break;
        }
        if diag.picard_sweeps >= cfg.picard_max {
            return Err(SolverError::PicardNoConvergence {
                iterations: diag.picard_sweeps,
                residual: diag.picard_residual,
                tol: cfg.picard_tol,
            });
        }
    }

    let next = SimState { t: t_new, v: vk, p: p_cur, p_f: state.p_f.clone() };
    Ok((next, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use crate::solver::config::{BodyForce, Lithostatic, TractionForcing};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn taylor_green(grid: Grid) -> VectorField {
        let mut v = VectorField::from_fn(
            grid,
            |x, y| (PI * x).sin() * (PI * y).cos(),
            |x, y| -(PI * x).cos() * (PI * y).sin(),
        );
        v.enforce_no_penetration();
        let (v, _) = leray_project(&v, 1e-12, None).unwrap();
        v
    }

    #[test]
    fn rest_state_stays_exactly_at_rest() {
        let g = Grid::unit(8);
        let cfg = SimConfig::new(g);
        let s0 = SimState::quiescent(g, ScalarField::zeros(g));
        let s1 = momentum_step(&s0, &cfg).unwrap();
        assert_eq!(s1.v.linf_norm(), 0.0);
        assert_eq!(s1.p.linf_norm(), 0.0);
        assert_eq!(s1.t, cfg.dt);
    }

    #[test]
    fn plug_resists_weak_forcing() {
        let g = Grid::unit(16);
        let mut cfg = SimConfig::new(g);
        cfg.rheology.q_star = 2.0;
        cfg.rheology.reg_n = 64;
        cfg.lithostatic = Lithostatic::Constant(2.0);
        cfg.body_force = BodyForce::Constant { x: 1e-6, y: 0.0 };
        cfg.dt = 2e-7;
        let s0 = SimState::quiescent(g, ScalarField::zeros(g));
        let s1 = momentum_step(&s0, &cfg).unwrap();
        // One step can transfer at most dt * |b| of momentum; the plastic
        // stress eats most of it.
        assert!(s1.v.linf_norm() > 0.0);
        assert!(s1.v.linf_norm() <= 1.1 * cfg.dt * 1e-6, "got {}", s1.v.linf_norm());
    }

    #[test]
    fn newtonian_shear_decay_matches_backward_euler_rate() {
        // Taylor-Green decays mode-exactly with rate 2 nu pi^2; backward
        // Euler gives the factor 1/(1 + 2 nu pi^2 dt) per step, modulo
        // O(h^2) discretization of the eigenvalue.
        let g = Grid::unit(32);
        let mut cfg = SimConfig::new(g);
        cfg.rheology.q_star = 0.0;
        cfg.slip.gamma_star = 0.0; // free slip; Taylor-Green has S12 = 0 at walls
        cfg.dt = 1e-3;
        let v0 = taylor_green(g);
        let e0 = v0.l2_norm();
        let s0 = SimState { t: 0.0, v: v0, p: ScalarField::zeros(g), p_f: ScalarField::zeros(g) };
        let s1 = momentum_step(&s0, &cfg).unwrap();
        let ratio = s1.v.l2_norm() / e0;
        let expected = 1.0 / (1.0 + 2.0 * cfg.rheology.nu_star * PI * PI * cfg.dt);
        assert!(
            (ratio - expected).abs() < 3e-3,
            "decay ratio {ratio}, backward-Euler value {expected}"
        );
    }

    #[test]
    fn picard_cap_is_reported() {
        let g = Grid::unit(8);
        let mut cfg = SimConfig::new(g);
        cfg.body_force = BodyForce::Constant { x: 1.0, y: 0.0 };
        cfg.picard_max = 1;
        let s0 = SimState::quiescent(g, ScalarField::zeros(g));
        match momentum_step(&s0, &cfg) {
            Err(SolverError::PicardNoConvergence { iterations, .. }) => assert_eq!(iterations, 1),
            other => panic!("expected Picard failure, got {other:?}"),
        }
    }

    #[test]
    fn navier_drag_dissipates_faster_than_free_slip() {
        let g = Grid::unit(16);
        let mut free = SimConfig::new(g);
        free.rheology.q_star = 0.0;
        free.slip.gamma_star = 0.0;
        free.dt = 1e-3;
        let mut dragged = free.clone();
        dragged.slip.gamma_star = 5.0;

        let v0 = taylor_green(g);
        let s0 = SimState {
            t: 0.0,
            v: v0,
            p: ScalarField::zeros(g),
            p_f: ScalarField::zeros(g),
        };
        let e_free = momentum_step(&s0, &free).unwrap().v.l2_norm();
        let e_drag = momentum_step(&s0, &dragged).unwrap().v.l2_norm();
        assert!(
            e_drag < e_free * 0.999,
            "wall drag should remove energy: {e_drag} vs {e_free}"
        );
    }

    #[test]
    fn positive_traction_drives_flow_along_the_wall_tangent() {
        // The natural condition (S n)_tau = -s_n + g with tangent +x at
        // bottom and top, +y at left and right: positive g accelerates the
        // near-wall fluid in the positive coordinate direction on every
        // wall, with no per-wall sign flips.
        let g = Grid::unit(16);
        let mut cfg = SimConfig::new(g);
        cfg.rheology.q_star = 0.0;
        cfg.slip.gamma_star = 0.0;
        cfg.dt = 1e-4;
        cfg.traction_forcing = TractionForcing::Analytic(Arc::new(|wall, _t, _s| match wall {
            Wall::Bottom => 1.0,
            Wall::Left => 2.0,
            _ => 0.0,
        }));
        let s0 = SimState::quiescent(g, ScalarField::zeros(g));
        let s1 = momentum_step(&s0, &cfg).unwrap();
        let u_near = s1.v.u_at(8, 0);
        let u_bulk = s1.v.u_at(8, 8);
        assert!(u_near > 0.0, "near-wall u = {u_near}");
        assert!(u_near > 5.0 * u_bulk.abs(), "near {u_near} vs bulk {u_bulk}");
        let v_near = s1.v.v_at(0, 8);
        assert!(v_near > 0.0, "near-wall v = {v_near}");
    }

    #[test]
    fn implicit_operator_is_symmetric_with_the_advertised_diagonal() {
        let g = Grid::new(5, 4, 1.3, 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut wall_lin = |n: usize| {
            (0..n)
                .map(|_| WallNode {
                    s_hat: 0.0,
                    slope: rng.gen_range(0.0..50.0),
                    offset: 0.0,
                    drive: 0.0,
                })
                .collect::<Vec<_>>()
        };
        let lin_b = wall_lin(g.nx + 1);
        let lin_t = wall_lin(g.nx + 1);
        let lin_l = wall_lin(g.ny + 1);
        let lin_r = wall_lin(g.ny + 1);
        let mut op = ViscousOperator::new(g, 0.07, 0.42, [&lin_b, &lin_t, &lin_l, &lin_r]);

        let n_u = g.u_face_count();
        let n = n_u + g.v_face_count();
        // Random vectors restricted to the unknowns: pinned faces stay 0.
        let sample = |rng: &mut ChaCha8Rng| {
            let mut w = vec![0.0; n];
            for j in 0..g.ny {
                for i in 1..g.nx {
                    w[g.u_face_idx(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
            for j in 1..g.ny {
                for i in 0..g.nx {
                    w[n_u + g.v_face_idx(i, j)] = rng.gen_range(-1.0..1.0);
                }
            }
            w
        };
        let x = sample(&mut rng);
        let y = sample(&mut rng);
        let mut ax = vec![0.0; n];
        let mut ay = vec![0.0; n];
        op.apply(&x, &mut ax);
        op.apply(&y, &mut ay);
        let xay: f64 = x.iter().zip(&ay).map(|(a, b)| a * b).sum();
        let yax: f64 = y.iter().zip(&ax).map(|(a, b)| a * b).sum();
        assert!(
            (xay - yax).abs() <= 1e-12 * xay.abs().max(yax.abs()),
            "asymmetry: {xay} vs {yax}"
        );

        // The preconditioner's diagonal must be the operator's, else the
        // wall pair inverses are inverses of the wrong blocks.
        let pc = build_preconditioner(&op);
        let mut probe = vec![0.0; n];
        let mut out = vec![0.0; n];
        let mut check = |f: usize, op: &mut ViscousOperator, probe: &mut Vec<f64>| {
            probe.fill(0.0);
            probe[f] = 1.0;
            op.apply(probe, &mut out);
            let expected = 1.0 / pc.inv_diag[f];
            assert!(
                (out[f] - expected).abs() <= 1e-12 * expected,
                "diagonal mismatch at {f}: {} vs {expected}",
                out[f]
            );
        };
        for j in 0..g.ny {
            for i in 1..g.nx {
                check(g.u_face_idx(i, j), &mut op, &mut probe);
            }
        }
        for j in 1..g.ny {
            for i in 0..g.nx {
                check(n_u + g.v_face_idx(i, j), &mut op, &mut probe);
            }
        }
    }

    #[test]
    fn sticking_walls_hold_while_the_interior_creeps() {
        // Threshold slip at a huge regularization index: walls whose
        // traction stays below s* must be immobile down to the
        // regularization scale while the bulk accelerates freely. The
        // forcing has curl, so it cannot be absorbed into the pressure.
        let g = Grid::unit(16);
        let mut cfg = SimConfig::new(g);
        cfg.rheology.q_star = 0.0;
        cfg.rheology.reg_n = 1_000_000_000_000;
        cfg.slip = SlipParams { s_star: 0.5, beta_star: 0.01, gamma_star: 1.0 };
        cfg.body_force =
            BodyForce::Analytic(Arc::new(|_t, _x, y| (0.2 * (PI * y).sin(), 0.0)));
        cfg.dt = 0.01;
        // The final wall speeds sit at the iteration truncation level, a
        // few times picard_tol * |v|, far above the physical stick root.
        cfg.picard_tol = 1e-7;
        let mut s = SimState::quiescent(g, ScalarField::zeros(g));
        for _ in 0..3 {
            s = momentum_step(&s, &cfg).unwrap();
        }
        let speeds = wall_speeds(&s.v);
        let wall_max = speeds
            .bottom
            .iter()
            .chain(&speeds.top)
            .chain(&speeds.left)
            .chain(&speeds.right)
            .fold(0.0f64, |m, &w| m.max(w.abs()));
        assert!(wall_max <= 1e-9, "wall speed {wall_max}");
        let u_mid = s.v.u_at(8, 8);
        assert!(u_mid > 1e-4, "interior u = {u_mid}");
    }
}
