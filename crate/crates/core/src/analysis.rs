//! Verification instruments.
//!
//! Everything here observes; nothing feeds back into the time stepping.
//! The pieces are the radial L-infinity truncation with its layer-selection
//! rule, a harness that drives the regularized constitutive maps along
//! synthetic convergent sequences and measures how fast their implicit
//! residuals die, per-step energy bookkeeping, and error norms against
//! manufactured solutions.

use crate::fields::{
    divergence, gradient_to_faces, sym_gradient, velocity_gradient_norm, Grid, ScalarField,
    VectorField,
};
use crate::rheology::{
    bulk_implicit_residual, plastic_stress_reg, slip_coefficient, viscous_stress_activated,
    yield_stress,
};
use crate::solver::momentum::wall_speeds;
use crate::solver::{SimConfig, SimState};
use crate::tensor::{SymTensor, SymTensor2};

/// Magnitude bound of a cell: per component, the larger absolute value of
/// its two face samples. Rescaling any of the cell's faces by a factor at
/// most r shrinks this bound by at least r, which is what makes the
/// truncation level an exact bound rather than an approximate one.
pub fn cell_magnitude(w: &VectorField, i: usize, j: usize) -> f64 {
    let g = w.grid;
    let u = w.u[g.u_face_idx(i, j)]
        .abs()
        .max(w.u[g.u_face_idx(i + 1, j)].abs());
    let v = w.v[g.v_face_idx(i, j)]
        .abs()
        .max(w.v[g.v_face_idx(i, j + 1)].abs());
    (u * u + v * v).sqrt()
}

/// Per-cell scale factors min(1, lambda / |w|).
fn truncation_factors(w: &VectorField, lambda: f64) -> Vec<f64> {
    let g = w.grid;
    let mut r = vec![1.0; g.cell_count()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let m = cell_magnitude(w, i, j);
            if m > lambda {
                r[g.cell_idx(i, j)] = lambda / m;
            }
        }
    }
    r
}

/// Radial cutoff w * min(1, lambda / |w|) on the staggered grid. The factor
/// is computed per cell from [`cell_magnitude`] and each face takes the
/// smaller factor of the cells it touches, so every output cell magnitude
/// is at most lambda and faces between sub-level cells are returned
/// bitwise unchanged.
pub fn linf_truncate(w: &VectorField, lambda: f64) -> VectorField {
    assert!(lambda > 0.0, "truncation level must be positive");
    let g = w.grid;
    let r = truncation_factors(w, lambda);
    let mut out = w.clone();
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let mut s = 1.0f64;
            if i > 0 {
                s = s.min(r[g.cell_idx(i - 1, j)]);
            }
            if i < g.nx {
                s = s.min(r[g.cell_idx(i, j)]);
            }
            out.u[g.u_face_idx(i, j)] *= s;
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let mut s = 1.0f64;
            if j > 0 {
                s = s.min(r[g.cell_idx(i, j - 1)]);
            }
            if j < g.ny {
                s = s.min(r[g.cell_idx(i, j)]);
            }
            out.v[g.v_face_idx(i, j)] *= s;
        }
    }
    out
}

/// What the truncation did to a field.
#[derive(Debug, Clone, Copy)]
pub struct TruncationReport {
    pub lambda: f64,
    /// L2 norms before and after.
    pub pre_norm: f64,
    pub post_norm: f64,
    /// Cells whose magnitude exceeded the level.
    pub flagged_cells: usize,
    pub total_cells: usize,
    /// Largest |div T(w) - div w| over cells none of whose faces were
    /// rescaled; structurally zero because those faces come back bitwise
    /// unchanged. Equals max |div T(w)| there when w is divergence free.
    pub div_violation: f64,
    /// Largest |grad T(w)| / (2 lambda |grad w| / |w|) over flagged cells,
    /// the pointwise gradient bound of the truncation. Discrete chain
    /// rules are inexact, so values up to 2 are accepted; cells whose
    /// reference gradient is below 1% of its maximum are skipped because
    /// both sides of the bound are discretization noise there.
    pub grad_bound_ratio: f64,
}

pub fn truncation_report(w: &VectorField, lambda: f64) -> TruncationReport {
    let g = w.grid;
    let t = linf_truncate(w, lambda);
    let r = truncation_factors(w, lambda);

    let div_w = divergence(w);
    let div_t = divergence(&t);
    let grad_w = velocity_gradient_norm(w);
    let grad_t = velocity_gradient_norm(&t);
    let grad_floor = 1e-2 * grad_w.data.iter().cloned().fold(0.0, f64::max);

    let untouched = |i: usize, j: usize| -> bool {
        (i == 0 || r[g.cell_idx(i - 1, j)] == 1.0)
            && (i + 1 == g.nx || r[g.cell_idx(i + 1, j)] == 1.0)
            && (j == 0 || r[g.cell_idx(i, j - 1)] == 1.0)
            && (j + 1 == g.ny || r[g.cell_idx(i, j + 1)] == 1.0)
    };

    let mut flagged_cells = 0;
    let mut div_violation = 0.0f64;
    let mut grad_ratio = 0.0f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell_idx(i, j);
            if r[c] < 1.0 {
                flagged_cells += 1;
                if grad_w.data[c] >= grad_floor {
                    let bound = 2.0 * lambda * grad_w.data[c] / cell_magnitude(w, i, j);
                    grad_ratio = grad_ratio.max(grad_t.data[c] / bound);
                }
            } else if untouched(i, j) {
                div_violation = div_violation.max((div_t.data[c] - div_w.data[c]).abs());
            }
        }
    }

    TruncationReport {
        lambda,
        pre_norm: w.l2_norm(),
        post_norm: t.l2_norm(),
        flagged_cells,
        total_cells: g.cell_count(),
        div_violation,
        grad_bound_ratio: grad_ratio,
    }
}

/// Field too small to populate any magnitude layer.
#[derive(Debug, thiserror::Error)]
#[error("field magnitude peaks at {max_magnitude:.3e}, below the first layer bound {level_base}; use lambda = {level_base}")]
pub struct DegenerateField {
    pub max_magnitude: f64,
    pub level_base: u32,
}

#[derive(Debug, Clone, Copy)]
pub struct LevelSelection {
    /// Chosen truncation level N^i*.
    pub lambda: f64,
    /// The minimizing layer index i* in 1..=N.
    pub layer: u32,
    /// Diagnostic integral over the chosen layer {N^i* <= |w| <= N^i*+1}.
    pub layer_integral: f64,
    /// Diagnostic integral over the whole domain.
    pub total_integral: f64,
}

/// Picks the truncation level from the magnitude layers
/// Q_i = {N^i <= |w| <= N^(i+1)}, i = 1..N: the returned level is N^i*
/// where i* minimizes the diagnostic integral over Q_i (smallest i on
/// ties). Since the layers are disjoint up to their shared boundaries, the
/// minimum is at most the total divided by N.
pub fn truncation_level_select(
    w: &VectorField,
    diagnostic: &ScalarField,
    level_base: u32,
) -> Result<LevelSelection, DegenerateField> {
    assert!(level_base >= 2, "layer base must be at least 2");
    let g = w.grid;
    crate::fields::assert_same_grid(g, diagnostic.grid);

    let n = level_base as f64;
    let mut speeds = vec![0.0; g.cell_count()];
    let mut max_speed = 0.0f64;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let s = cell_magnitude(w, i, j);
            speeds[g.cell_idx(i, j)] = s;
            max_speed = max_speed.max(s);
        }
    }
    if max_speed < n {
        return Err(DegenerateField { max_magnitude: max_speed, level_base });
    }

    let area = g.cell_area();
    let total_integral: f64 = diagnostic.data.iter().map(|d| d * area).sum();

    let mut best: Option<(u32, f64)> = None;
    for layer in 1..=level_base {
        let lo = n.powi(layer as i32);
        let hi = n.powi(layer as i32 + 1);
        let mut integral = 0.0;
        for c in 0..g.cell_count() {
            if speeds[c] >= lo && speeds[c] <= hi {
                integral += diagnostic.data[c] * area;
            }
        }
        let better = match best {
            None => true,
            Some((_, b)) => integral < b,
        };
        if better {
            best = Some((layer, integral));
        }
    }
    let (layer, layer_integral) = best.expect("at least one layer inspected");
    Ok(LevelSelection { lambda: n.powi(layer as i32), layer, layer_integral, total_integral })
}

/// A sequence (D_n, p_f_n) -> (D, p_f) with the stresses built from the
/// exact regularized formulas at every n; the harness then watches the
/// implicit residuals die as n grows. Perturbations enter at rate 1/n.
pub struct SyntheticFamily {
    pub name: &'static str,
    grid: Grid,
    d_limit: Vec<SymTensor2>,
    d_perturb: Vec<SymTensor2>,
    p_f_limit: Vec<f64>,
    p_f_perturb: Vec<f64>,
    p_s: f64,
    delta_star: f64,
}

impl SyntheticFamily {
    fn base_fields(grid: Grid) -> (Vec<SymTensor2>, Vec<f64>) {
        use std::f64::consts::PI;
        let mut d = Vec::with_capacity(grid.cell_count());
        let mut p_f = Vec::with_capacity(grid.cell_count());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                // Trace-free strain with |D| = sqrt(2) a(x, y) in [1.1, 2.3]
                // (bounded away from zero so constitutive maps stay
                // Lipschitz along the family) rotated by a smooth angle.
                let a = 1.2 + 0.4 * (2.0 * PI * x).sin() * (PI * y).cos();
                let theta = 0.7 * (PI * x).cos() + 0.3 * (2.0 * PI * y).sin();
                let dd = SymTensor2::new(a, -a, 0.0).rotate(theta);
                d.push(dd);
                p_f.push(0.8 + 0.6 * (PI * x).cos() * (PI * y).sin());
            }
        }
        (d, p_f)
    }

    /// D_n = D, p_f_n = p_f: isolates the pure regularization error.
    pub fn frozen(grid: Grid) -> Self {
        let (d_limit, p_f_limit) = Self::base_fields(grid);
        let zero = vec![SymTensor2::zero(); grid.cell_count()];
        let none = vec![0.0; grid.cell_count()];
        Self {
            name: "frozen",
            grid,
            d_limit,
            d_perturb: zero,
            p_f_limit,
            p_f_perturb: none,
            p_s: 2.0,
            delta_star: 0.4,
        }
    }

    /// D_n = D + P/n with an oscillatory deviatoric P, fixed pressure.
    pub fn strained(grid: Grid) -> Self {
        use std::f64::consts::PI;
        let (d_limit, p_f_limit) = Self::base_fields(grid);
        let mut d_perturb = Vec::with_capacity(grid.cell_count());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                let b = 0.3 * (3.0 * PI * x).sin() * (2.0 * PI * y).sin();
                d_perturb.push(SymTensor2::new(b, -b, 0.2 * (PI * (x + y)).cos()));
            }
        }
        let none = vec![0.0; grid.cell_count()];
        Self {
            name: "strained",
            grid,
            d_limit,
            d_perturb,
            p_f_limit,
            p_f_perturb: none,
            p_s: 2.0,
            delta_star: 0.4,
        }
    }

    /// p_f_n = p_f + r/n (settling pore pressure) with a mild strain wobble;
    /// exercises the Lipschitz dependence of the yield stress.
    pub fn relaxing(grid: Grid) -> Self {
        use std::f64::consts::PI;
        let (d_limit, p_f_limit) = Self::base_fields(grid);
        let mut d_perturb = Vec::with_capacity(grid.cell_count());
        let mut p_f_perturb = Vec::with_capacity(grid.cell_count());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                d_perturb.push(SymTensor2::new(0.0, 0.0, 0.25 * (2.0 * PI * x).cos()));
                p_f_perturb.push(0.5 * (2.0 * PI * y).cos() * (PI * x).sin());
            }
        }
        Self {
            name: "relaxing",
            grid,
            d_limit,
            d_perturb,
            p_f_limit,
            p_f_perturb,
            p_s: 2.0,
            delta_star: 0.4,
        }
    }

    pub fn builtin(grid: Grid) -> Vec<SyntheticFamily> {
        vec![Self::frozen(grid), Self::strained(grid), Self::relaxing(grid)]
    }

    fn strain_at(&self, n: u64, c: usize) -> SymTensor2 {
        self.d_limit[c].add(self.d_perturb[c].scale(1.0 / n as f64))
    }

    fn pore_at(&self, n: u64, c: usize) -> f64 {
        self.p_f_limit[c] + self.p_f_perturb[c] / n as f64
    }
}

/// Per-n residuals of the convergence statement on one family.
#[derive(Debug, Clone)]
pub struct LemmaRunReport {
    pub family: &'static str,
    pub n_values: Vec<u64>,
    /// Integral of the implicit plastic residual of Z_n against the
    /// limiting strain and yield stress.
    pub residual_c1: Vec<f64>,
    /// L2 distance of V_n from the limiting activated stress.
    pub residual_c3: Vec<f64>,
    /// Integral of Z_n : D_n minus the limit pairing (nonpositive up to
    /// rounding; shrinks to zero on convergent families).
    pub pairing_gap: Vec<f64>,
}

/// Yield coefficient and viscosity are the normalized ones the convergence
/// statement is phrased in: tau = (p_s - p_f)^+ and V = (1 - delta*/|D|)^+ D.
pub fn lemma_harness(family: &SyntheticFamily, n_values: &[u64]) -> LemmaRunReport {
    let g = family.grid;
    let area = g.cell_area();
    let cells = g.cell_count();

    let mut residual_c1 = Vec::with_capacity(n_values.len());
    let mut residual_c3 = Vec::with_capacity(n_values.len());
    let mut pairing_gap = Vec::with_capacity(n_values.len());

    // Limit objects: Z = tau D/|D| (|D| is bounded away from zero by
    // construction), V by the activated formula at the limit strain.
    let mut z_limit = Vec::with_capacity(cells);
    let mut v_limit = Vec::with_capacity(cells);
    let mut limit_pairing = 0.0;
    for c in 0..cells {
        let d = family.d_limit[c];
        let tau = yield_stress(family.p_s, family.p_f_limit[c], 1.0);
        let z = d.scale(tau / d.norm());
        limit_pairing += z.dot(d) * area;
        z_limit.push(z);
        v_limit.push(viscous_stress_activated(d, 0.5, family.delta_star, 2.0));
    }

    for &n in n_values {
        let mut c1 = 0.0;
        let mut c3_sq = 0.0;
        let mut pairing = 0.0;
        for c in 0..cells {
            let d_n = family.strain_at(n, c);
            let tau_n = yield_stress(family.p_s, family.pore_at(n, c), 1.0);
            let z_n = plastic_stress_reg(d_n, tau_n, n);
            let v_n = viscous_stress_activated(d_n, 0.5, family.delta_star, 2.0);

            let tau_limit = yield_stress(family.p_s, family.p_f_limit[c], 1.0);
            c1 += bulk_implicit_residual(z_n, family.d_limit[c], tau_limit) * area;
            c3_sq += v_n.sub(v_limit[c]).dot(v_n.sub(v_limit[c])) * area;
            pairing += z_n.dot(d_n) * area;
        }
        residual_c1.push(c1);
        residual_c3.push(c3_sq.sqrt());
        pairing_gap.push(pairing - limit_pairing);
    }

    LemmaRunReport { family: family.name, n_values: n_values.to_vec(), residual_c1, residual_c3, pairing_gap }
}

/// Terms of the discrete kinetic-energy inequality and of the pore-pressure
/// balance for one accepted step. Signs follow the inequality: the step is
/// admissible when gamma2_slack is nonnegative (up to discretization
/// error) and all dissipation terms are nonnegative.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    /// (||v+||^2 - ||v||^2) / (2 dt).
    pub kinetic_rate: f64,
    /// Integral of |D v+|^2.
    pub strain_sq: f64,
    /// Integral of V(D v+) : D v+.
    pub viscous_dissipation: f64,
    /// Integral of tau |D v+|^2 / (|D v+| + 1/n).
    pub plastic_dissipation: f64,
    /// Boundary integral of s_n(v_tau) . v_tau.
    pub slip_dissipation: f64,
    /// (b, v+) plus the power of any boundary traction forcing.
    pub forcing_power: f64,
    /// Budget the activation threshold may consume: 3 nu* delta*^2 |Omega|.
    pub activation_slack: f64,
    /// forcing + activation slack - kinetic rate - nu* strain_sq
    /// - plastic - slip; the inequality holds when this is >= 0.
    pub gamma2_slack: f64,
    /// (||p_f+||^2 - ||p_f||^2) / (2 dt).
    pub pore_rate: f64,
    /// K ||grad p_f+||^2.
    pub pore_diffusion: f64,
    /// K rho_f (b, grad p_f+) - (p_s v+, grad p_f+).
    pub pore_forcing: f64,
    /// pore_rate + pore_diffusion - pore_forcing; backward Euler makes
    /// this nonpositive up to O(dt).
    pub delta2_residual: f64,
}

pub fn energy_report(prev: &SimState, next: &SimState, cfg: &SimConfig) -> EnergyReport {
    let g = cfg.grid;
    let dt = next.t - prev.t;
    assert!(dt > 0.0, "states must be consecutive in time");
    let area = g.cell_area();
    let omega = g.lx * g.ly;
    let nu = cfg.rheology.nu_star;

    let e_prev = prev.v.l2_norm().powi(2);
    let e_next = next.v.l2_norm().powi(2);
    let kinetic_rate = (e_next - e_prev) / (2.0 * dt);

    // Bulk dissipation, with the yield stress the momentum step saw: the
    // pore pressure entering the stress is the pre-step one.
    let d = sym_gradient(&next.v);
    let p_s = cfg.lithostatic.sample_cells(g, next.t);
    let mut strain_sq = 0.0;
    let mut viscous = 0.0;
    let mut plastic = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell_idx(i, j);
            let dd = d.at(i, j);
            let norm = dd.norm();
            strain_sq += norm * norm * area;
            let v_stress = viscous_stress_activated(
                dd,
                nu,
                cfg.rheology.delta_star,
                cfg.rheology.q_exponent,
            );
            viscous += v_stress.dot(dd) * area;
            let tau = yield_stress(p_s.data[c], prev.p_f.data[c], cfg.rheology.q_star);
            plastic += tau * norm * norm / (norm + 1.0 / cfg.rheology.reg_n as f64) * area;
        }
    }

    // Boundary terms: uniform node weights, the same quadrature the
    // momentum assembly applies its traction rows with. The end nodes sit
    // on pinned normal faces and contribute nothing either way.
    let speeds = wall_speeds(&next.v);
    let mut slip = 0.0;
    let mut traction_power = 0.0;
    let mut wall_quad = |vals: &[f64], h: f64, wall: crate::solver::Wall| {
        for (k, &s) in vals.iter().enumerate() {
            let c = slip_coefficient(s.abs(), &cfg.slip, cfg.rheology.reg_n);
            slip += c * s * s * h;
            let gf = cfg.traction_forcing.eval(wall, next.t, k as f64 * h);
            traction_power += gf * s * h;
        }
    };
    wall_quad(&speeds.bottom, g.hx(), crate::solver::Wall::Bottom);
    wall_quad(&speeds.top, g.hx(), crate::solver::Wall::Top);
    wall_quad(&speeds.left, g.hy(), crate::solver::Wall::Left);
    wall_quad(&speeds.right, g.hy(), crate::solver::Wall::Right);

    let body = cfg.body_force.sample_faces(g, next.t);
    let mut forcing_power = traction_power;
    for (bf, vf) in body.u.iter().zip(next.v.u.iter()) {
        forcing_power += bf * vf * area;
    }
    for (bf, vf) in body.v.iter().zip(next.v.v.iter()) {
        forcing_power += bf * vf * area;
    }

    let activation_slack = 3.0 * nu * cfg.rheology.delta_star.powi(2) * omega;
    let gamma2_slack = forcing_power + activation_slack
        - kinetic_rate
        - nu * strain_sq
        - plastic
        - slip;

    // Pore-pressure balance.
    let pf_prev = prev.p_f.l2_norm().powi(2);
    let pf_next = next.p_f.l2_norm().powi(2);
    let pore_rate = (pf_next - pf_prev) / (2.0 * dt);
    let grad_pf = gradient_to_faces(&next.p_f);
    let kappa = cfg.permeability;
    let mut grad_sq = 0.0;
    let mut pore_forcing = 0.0;
    let mut body_flux = cfg.body_force.sample_faces(g, next.t);
    body_flux.enforce_no_penetration();
    for j in 0..g.ny {
        for i in 1..g.nx {
            let f = g.u_face_idx(i, j);
            let gp = grad_pf.u[f];
            grad_sq += gp * gp * area;
            let ps_face = 0.5 * (p_s.data[g.cell_idx(i - 1, j)] + p_s.data[g.cell_idx(i, j)]);
            pore_forcing +=
                (kappa * cfg.density_fluid * body_flux.u[f] - ps_face * next.v.u[f]) * gp * area;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let f = g.v_face_idx(i, j);
            let gp = grad_pf.v[f];
            grad_sq += gp * gp * area;
            let ps_face = 0.5 * (p_s.data[g.cell_idx(i, j - 1)] + p_s.data[g.cell_idx(i, j)]);
            pore_forcing +=
                (kappa * cfg.density_fluid * body_flux.v[f] - ps_face * next.v.v[f]) * gp * area;
        }
    }
    let pore_diffusion = kappa * grad_sq;
    let delta2_residual = pore_rate + pore_diffusion - pore_forcing;

    EnergyReport {
        kinetic_rate,
        strain_sq,
        viscous_dissipation: viscous,
        plastic_dissipation: plastic,
        slip_dissipation: slip,
        forcing_power,
        activation_slack,
        gamma2_slack,
        pore_rate,
        pore_diffusion,
        pore_forcing,
        delta2_residual,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorNorm {
    L2,
    LInf,
}

/// Velocity error against an analytic field sampled at the face centers.
pub fn mms_error(
    state: &SimState,
    exact_u: impl Fn(f64, f64) -> f64,
    exact_v: impl Fn(f64, f64) -> f64,
    norm: ErrorNorm,
) -> f64 {
    let g = state.grid();
    let area = g.cell_area();
    let mut sum_sq = 0.0;
    let mut max = 0.0f64;
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let (x, y) = g.u_face_center(i, j);
            let e = state.v.u[g.u_face_idx(i, j)] - exact_u(x, y);
            sum_sq += e * e * area;
            max = max.max(e.abs());
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let (x, y) = g.v_face_center(i, j);
            let e = state.v.v[g.v_face_idx(i, j)] - exact_v(x, y);
            sum_sq += e * e * area;
            max = max.max(e.abs());
        }
    }
    match norm {
        ErrorNorm::L2 => sum_sq.sqrt(),
        ErrorNorm::LInf => max,
    }
}
