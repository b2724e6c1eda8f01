//! Staggered-grid field containers on an axis-aligned box.
//!
//! Scalars and symmetric tensors are cell-centered; velocities live on cell
//! faces (x-components on vertical faces, y-components on horizontal faces).
//! Normal velocity components on the domain boundary are the impermeability
//! degrees of freedom and are kept at zero by the solver.

mod ops;

pub use ops::{
    advect_scalar, convective_cutoff, convective_term_truncated, divergence, gradient_to_faces,
    laplacian_neumann, sym_gradient, velocity_gradient_norm, AdvectionScheme,
};

use crate::tensor::SymTensor2;

/// Uniform rectangular grid: `nx` x `ny` cells covering `[0,lx] x [0,ly]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        assert!(nx >= 4 && ny >= 4, "grid must have at least 4 cells per direction");
        assert!(lx > 0.0 && ly > 0.0, "domain extents must be positive");
        Self { nx, ny, lx, ly }
    }

    /// Unit square helper used throughout the tests.
    pub fn unit(n: usize) -> Self {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    #[inline]
    pub fn cell_idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn u_face_idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.nx && j < self.ny);
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn v_face_idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j <= self.ny);
        j * self.nx + i
    }

    pub fn u_face_count(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn v_face_count(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn u_face_center(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    pub fn v_face_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), j as f64 * self.hy())
    }
}

#[track_caller]
pub(crate) fn assert_same_grid(a: Grid, b: Grid) {
    assert_eq!(a, b, "fields live on different grids");
}

/// Cell-centered scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![0.0; grid.cell_count()] }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut s = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                s.data[grid.cell_idx(i, j)] = f(x, y);
            }
        }
        s
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, data: vec![value; grid.cell_count()] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.cell_idx(i, j)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[self.grid.cell_idx(i, j)]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Cell-area-weighted L2 norm.
    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Area-weighted L2 norm of the zero-flux face gradient.
    pub fn grad_l2_norm(&self) -> f64 {
        let g = gradient_to_faces(self);
        g.l2_norm()
    }
}

/// Staggered (MAC) velocity field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    /// x-components on vertical faces, `(nx+1) * ny` entries.
    pub u: Vec<f64>,
    /// y-components on horizontal faces, `nx * (ny+1)` entries.
    pub v: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, u: vec![0.0; grid.u_face_count()], v: vec![0.0; grid.v_face_count()] }
    }

    /// Samples analytic components at the face centers.
    pub fn from_fn(
        grid: Grid,
        mut fu: impl FnMut(f64, f64) -> f64,
        mut fv: impl FnMut(f64, f64) -> f64,
    ) -> Self {
        let mut w = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..=grid.nx {
                let (x, y) = grid.u_face_center(i, j);
                w.u[grid.u_face_idx(i, j)] = fu(x, y);
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.v_face_center(i, j);
                w.v[grid.v_face_idx(i, j)] = fv(x, y);
            }
        }
        w
    }

    #[inline]
    pub fn u_at(&self, i: usize, j: usize) -> f64 {
        self.u[self.grid.u_face_idx(i, j)]
    }

    #[inline]
    pub fn v_at(&self, i: usize, j: usize) -> f64 {
        self.v[self.grid.v_face_idx(i, j)]
    }

    /// Zeroes the boundary normal components (impermeable container).
    pub fn enforce_no_penetration(&mut self) {
        let g = self.grid;
        for j in 0..g.ny {
            self.u[g.u_face_idx(0, j)] = 0.0;
            self.u[g.u_face_idx(g.nx, j)] = 0.0;
        }
        for i in 0..g.nx {
            self.v[g.v_face_idx(i, 0)] = 0.0;
            self.v[g.v_face_idx(i, g.ny)] = 0.0;
        }
    }

    /// Largest boundary normal component, zero for admissible states.
    pub fn max_boundary_normal(&self) -> f64 {
        let g = self.grid;
        let mut m = 0.0f64;
        for j in 0..g.ny {
            m = m.max(self.u_at(0, j).abs()).max(self.u_at(g.nx, j).abs());
        }
        for i in 0..g.nx {
            m = m.max(self.v_at(i, 0).abs()).max(self.v_at(i, g.ny).abs());
        }
        m
    }

    pub fn linf_norm(&self) -> f64 {
        let mu = self.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mv = self.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        mu.max(mv)
    }

    /// Face-area-weighted L2 norm.
    pub fn l2_norm(&self) -> f64 {
        let a = self.grid.cell_area();
        let su: f64 = self.u.iter().map(|v| v * v).sum();
        let sv: f64 = self.v.iter().map(|v| v * v).sum();
        ((su + sv) * a).sqrt()
    }

    /// Advective CFL number max(|u|/hx, |v|/hy) * dt.
    pub fn cfl_number(&self, dt: f64) -> f64 {
        let mu = self.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mv = self.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        dt * (mu / self.grid.hx()).max(mv / self.grid.hy())
    }

    /// Velocity vector interpolated to a cell center.
    pub fn at_cell(&self, i: usize, j: usize) -> (f64, f64) {
        (
            0.5 * (self.u_at(i, j) + self.u_at(i + 1, j)),
            0.5 * (self.v_at(i, j) + self.v_at(i, j + 1)),
        )
    }
}

/// Cell-centered symmetric 2x2 tensor field stored by component.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    pub grid: Grid,
    pub xx: Vec<f64>,
    pub yy: Vec<f64>,
    pub xy: Vec<f64>,
}

impl SymTensorField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.cell_count();
        Self { grid, xx: vec![0.0; n], yy: vec![0.0; n], xy: vec![0.0; n] }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> SymTensor2) -> Self {
        let mut t = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                t.set_at(i, j, f(x, y));
            }
        }
        t
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> SymTensor2 {
        let k = self.grid.cell_idx(i, j);
        SymTensor2::new(self.xx[k], self.yy[k], self.xy[k])
    }

    #[inline]
    pub fn set_at(&mut self, i: usize, j: usize, t: SymTensor2) {
        let k = self.grid.cell_idx(i, j);
        self.xx[k] = t.xx;
        self.yy[k] = t.yy;
        self.xy[k] = t.xy;
    }

    /// Applies a pointwise map to every cell value.
    pub fn map(&self, f: impl Fn(SymTensor2) -> SymTensor2) -> Self {
        let mut out = Self::zeros(self.grid);
        for k in 0..self.grid.cell_count() {
            let t = f(SymTensor2::new(self.xx[k], self.yy[k], self.xy[k]));
            out.xx[k] = t.xx;
            out.yy[k] = t.yy;
            out.xy[k] = t.xy;
        }
        out
    }
}
