//! Difference operators on the staggered grid.
//!
//! `divergence`, `gradient_to_faces` and `laplacian_neumann` form an exact
//! discrete calculus: the Laplacian is the composition div(grad), and
//! summation by parts holds to rounding for fields with zero boundary
//! normal velocity. The strain rate is cell-centered with second-order
//! stencils everywhere, including one-sided variants at the walls.

use super::{assert_same_grid, ScalarField, SymTensorField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvectionScheme {
    Upwind,
    Central,
}

/// Cell-centered divergence of a face velocity field.
pub fn divergence(w: &VectorField) -> ScalarField {
    let g = w.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.data[g.cell_idx(i, j)] = (w.u_at(i + 1, j) - w.u_at(i, j)) / hx
                + (w.v_at(i, j + 1) - w.v_at(i, j)) / hy;
        }
    }
    out
}

/// Face gradient of a cell scalar with zero flux through the boundary.
///
/// Negative adjoint of [`divergence`] under the cell/face inner products,
/// which is what makes the projection and the pore-pressure energy balance
/// exact in the discrete sense.
pub fn gradient_to_faces(s: &ScalarField) -> VectorField {
    let g = s.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = VectorField::zeros(g);
    for j in 0..g.ny {
        for i in 1..g.nx {
            out.u[g.u_face_idx(i, j)] = (s.at(i, j) - s.at(i - 1, j)) / hx;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.v[g.v_face_idx(i, j)] = (s.at(i, j) - s.at(i, j - 1)) / hy;
        }
    }
    out
}

/// Five-point Laplacian with homogeneous Neumann walls; identical to
/// div(gradient_to_faces(s)) stencil by stencil.
pub fn laplacian_neumann(s: &ScalarField) -> ScalarField {
    let g = s.grid;
    let (hx2, hy2) = (g.hx() * g.hx(), g.hy() * g.hy());
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = s.at(i, j);
            let mut acc = 0.0;
            if i + 1 < g.nx {
                acc += (s.at(i + 1, j) - c) / hx2;
            }
            if i > 0 {
                acc -= (c - s.at(i - 1, j)) / hx2;
            }
            if j + 1 < g.ny {
                acc += (s.at(i, j + 1) - c) / hy2;
            }
            if j > 0 {
                acc -= (c - s.at(i, j - 1)) / hy2;
            }
            out.data[g.cell_idx(i, j)] = acc;
        }
    }
    out
}

/// Second-order derivative at a wall from the first three interior samples
/// (offsets h/2, 3h/2, 5h/2 from the wall).
#[inline]
fn one_sided_wall_derivative(f1: f64, f2: f64, f3: f64, h: f64) -> f64 {
    (-2.0 * f1 + 3.0 * f2 - f3) / h
}

/// Shear-rate values at grid nodes: 0.5*(du/dy + dv/dx).
///
/// Interior nodes use centered differences of the neighboring faces; wall
/// nodes use the second-order one-sided stencil.
pub(crate) fn shear_rate_at_nodes(w: &VectorField) -> Vec<f64> {
    let g = w.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut nodes = vec![0.0; (g.nx + 1) * (g.ny + 1)];
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            let dudy = if j == 0 {
                one_sided_wall_derivative(w.u_at(i, 0), w.u_at(i, 1), w.u_at(i, 2), hy)
            } else if j == g.ny {
                -one_sided_wall_derivative(
                    w.u_at(i, g.ny - 1),
                    w.u_at(i, g.ny - 2),
                    w.u_at(i, g.ny - 3),
                    hy,
                )
            } else {
                (w.u_at(i, j) - w.u_at(i, j - 1)) / hy
            };
            let dvdx = if i == 0 {
                one_sided_wall_derivative(w.v_at(0, j), w.v_at(1, j), w.v_at(2, j), hx)
            } else if i == g.nx {
                -one_sided_wall_derivative(
                    w.v_at(g.nx - 1, j),
                    w.v_at(g.nx - 2, j),
                    w.v_at(g.nx - 3, j),
                    hx,
                )
            } else {
                (w.v_at(i, j) - w.v_at(i - 1, j)) / hx
            };
            nodes[j * (g.nx + 1) + i] = 0.5 * (dudy + dvdx);
        }
    }
    nodes
}

/// Cell-centered symmetric velocity gradient.
///
/// Diagonal entries come straight from the face staggering (exact second
/// order at cell centers); the shear entry is averaged from the four
/// surrounding nodes.
pub fn sym_gradient(w: &VectorField) -> SymTensorField {
    let g = w.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let nodes = shear_rate_at_nodes(w);
    let node = |i: usize, j: usize| nodes[j * (g.nx + 1) + i];
    let mut out = SymTensorField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.cell_idx(i, j);
            out.xx[k] = (w.u_at(i + 1, j) - w.u_at(i, j)) / hx;
            out.yy[k] = (w.v_at(i, j + 1) - w.v_at(i, j)) / hy;
            out.xy[k] =
                0.25 * (node(i, j) + node(i + 1, j) + node(i, j + 1) + node(i + 1, j + 1));
        }
    }
    out
}

/// Frobenius norm of the full (unsymmetrized) velocity gradient at cell
/// centers, used by the truncation diagnostics.
pub fn velocity_gradient_norm(w: &VectorField) -> ScalarField {
    let g = w.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = ScalarField::zeros(g);
    // Cell-centered tangential derivatives from neighbor cell averages with
    // one-sided stencils at the walls.
    let u_center = |i: usize, j: usize| 0.5 * (w.u_at(i, j) + w.u_at(i + 1, j));
    let v_center = |i: usize, j: usize| 0.5 * (w.v_at(i, j) + w.v_at(i, j + 1));
    for j in 0..g.ny {
        for i in 0..g.nx {
            let dudx = (w.u_at(i + 1, j) - w.u_at(i, j)) / hx;
            let dvdy = (w.v_at(i, j + 1) - w.v_at(i, j)) / hy;
            let dudy = if j == 0 {
                (u_center(i, 1) - u_center(i, 0)) / hy
            } else if j == g.ny - 1 {
                (u_center(i, g.ny - 1) - u_center(i, g.ny - 2)) / hy
            } else {
                (u_center(i, j + 1) - u_center(i, j - 1)) / (2.0 * hy)
            };
            let dvdx = if i == 0 {
                (v_center(1, j) - v_center(0, j)) / hx
            } else if i == g.nx - 1 {
                (v_center(g.nx - 1, j) - v_center(g.nx - 2, j)) / hx
            } else {
                (v_center(i + 1, j) - v_center(i - 1, j)) / (2.0 * hx)
            };
            out.data[g.cell_idx(i, j)] =
                (dudx * dudx + dudy * dudy + dvdx * dvdx + dvdy * dvdy).sqrt();
        }
    }
    out
}

/// Advective derivative v . grad s at cell centers.
pub fn advect_scalar(s: &ScalarField, w: &VectorField, scheme: AdvectionScheme) -> ScalarField {
    assert_same_grid(s.grid, w.grid);
    let g = s.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (uc, vc) = w.at_cell(i, j);
            let dsdx = match scheme {
                AdvectionScheme::Upwind => {
                    if uc >= 0.0 {
                        if i > 0 {
                            (s.at(i, j) - s.at(i - 1, j)) / hx
                        } else {
                            0.0 // zero-gradient ghost at the wall
                        }
                    } else if i + 1 < g.nx {
                        (s.at(i + 1, j) - s.at(i, j)) / hx
                    } else {
                        0.0
                    }
                }
                AdvectionScheme::Central => {
                    if i == 0 {
                        (s.at(1, j) - s.at(0, j)) / hx
                    } else if i == g.nx - 1 {
                        (s.at(g.nx - 1, j) - s.at(g.nx - 2, j)) / hx
                    } else {
                        (s.at(i + 1, j) - s.at(i - 1, j)) / (2.0 * hx)
                    }
                }
            };
            let dsdy = match scheme {
                AdvectionScheme::Upwind => {
                    if vc >= 0.0 {
                        if j > 0 {
                            (s.at(i, j) - s.at(i, j - 1)) / hy
                        } else {
                            0.0
                        }
                    } else if j + 1 < g.ny {
                        (s.at(i, j + 1) - s.at(i, j)) / hy
                    } else {
                        0.0
                    }
                }
                AdvectionScheme::Central => {
                    if j == 0 {
                        (s.at(i, 1) - s.at(i, 0)) / hy
                    } else if j == g.ny - 1 {
                        (s.at(i, g.ny - 1) - s.at(i, g.ny - 2)) / hy
                    } else {
                        (s.at(i, j + 1) - s.at(i, j - 1)) / (2.0 * hy)
                    }
                }
            };
            out.data[g.cell_idx(i, j)] = uc * dsdx + vc * dsdy;
        }
    }
    out
}

/// Smooth convective cutoff: 1 below reg_n, 0 above 2*reg_n, cubic Hermite
/// blend in between. Takes the squared speed. Max slope is 1.5/reg_n.
pub fn convective_cutoff(speed_sq: f64, reg_n: u64) -> f64 {
    let n = reg_n as f64;
    if speed_sq <= n {
        1.0
    } else if speed_sq >= 2.0 * n {
        0.0
    } else {
        let t = (speed_sq - n) / n;
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

/// Product u*v at grid nodes; zero on the boundary because the normal
/// velocity vanishes there.
fn momentum_flux_at_nodes(w: &VectorField) -> Vec<f64> {
    let g = w.grid;
    let mut nodes = vec![0.0; (g.nx + 1) * (g.ny + 1)];
    for j in 1..g.ny {
        for i in 1..g.nx {
            let un = 0.5 * (w.u_at(i, j - 1) + w.u_at(i, j));
            let vn = 0.5 * (w.v_at(i - 1, j) + w.v_at(i, j));
            nodes[j * (g.nx + 1) + i] = un * vn;
        }
    }
    nodes
}

/// Conservative convective term div(v (x) v), damped pointwise by the
/// cutoff evaluated at the squared face speed. Boundary normal faces are
/// constrained and get zero.
pub fn convective_term_truncated(w: &VectorField, reg_n: u64) -> VectorField {
    let g = w.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let flux = momentum_flux_at_nodes(w);
    let node = |i: usize, j: usize| flux[j * (g.nx + 1) + i];
    let mut out = VectorField::zeros(g);

    for j in 0..g.ny {
        for i in 1..g.nx {
            let uc_r = 0.5 * (w.u_at(i, j) + w.u_at(i + 1, j));
            let uc_l = 0.5 * (w.u_at(i - 1, j) + w.u_at(i, j));
            let duu = (uc_r * uc_r - uc_l * uc_l) / hx;
            let duv = (node(i, j + 1) - node(i, j)) / hy;
            let v_avg = 0.25
                * (w.v_at(i - 1, j) + w.v_at(i - 1, j + 1) + w.v_at(i, j) + w.v_at(i, j + 1));
            let speed_sq = w.u_at(i, j) * w.u_at(i, j) + v_avg * v_avg;
            out.u[g.u_face_idx(i, j)] = convective_cutoff(speed_sq, reg_n) * (duu + duv);
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let vc_t = 0.5 * (w.v_at(i, j) + w.v_at(i, j + 1));
            let vc_b = 0.5 * (w.v_at(i, j - 1) + w.v_at(i, j));
            let dvv = (vc_t * vc_t - vc_b * vc_b) / hy;
            let duv = (node(i + 1, j) - node(i, j)) / hx;
            let u_avg = 0.25
                * (w.u_at(i, j - 1) + w.u_at(i, j) + w.u_at(i + 1, j - 1) + w.u_at(i + 1, j));
            let speed_sq = w.v_at(i, j) * w.v_at(i, j) + u_avg * u_avg;
            out.v[g.v_face_idx(i, j)] = convective_cutoff(speed_sq, reg_n) * (dvv + duv);
        }
    }
    out
}
