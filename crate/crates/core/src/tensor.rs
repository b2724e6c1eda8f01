//! Small symmetric tensor values used by the constitutive maps.
//!
//! Symmetry is structural: only the upper triangle is stored, so a
//! `SymTensor2` can never drift away from S = S^T under arithmetic.

/// Operations the constitutive maps need from a symmetric tensor.
///
/// `dot` is the double contraction A:B = sum_ij A_ij B_ij and `norm` the
/// Frobenius norm sqrt(A:A); off-diagonal entries therefore count twice.
pub trait SymTensor: Copy {
    fn zero() -> Self;
    fn dot(self, other: Self) -> f64;
    fn scale(self, k: f64) -> Self;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;

    fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Symmetric 2x2 tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor2 {
    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    /// Conjugation R A R^T by the rotation with angle `theta`.
    pub fn rotate(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        // Rows of R A with R = [[c, -s], [s, c]].
        let a11 = c * self.xx - s * self.xy;
        let a12 = c * self.xy - s * self.yy;
        let a21 = s * self.xx + c * self.xy;
        let a22 = s * self.xy + c * self.yy;
        Self {
            xx: a11 * c - a12 * s,
            yy: a21 * s + a22 * c,
            xy: a11 * s + a12 * c,
        }
    }
}

impl SymTensor for SymTensor2 {
    fn zero() -> Self {
        Self::default()
    }

    fn dot(self, o: Self) -> f64 {
        self.xx * o.xx + self.yy * o.yy + 2.0 * self.xy * o.xy
    }

    fn scale(self, k: f64) -> Self {
        Self::new(self.xx * k, self.yy * k, self.xy * k)
    }

    fn add(self, o: Self) -> Self {
        Self::new(self.xx + o.xx, self.yy + o.yy, self.xy + o.xy)
    }

    fn sub(self, o: Self) -> Self {
        Self::new(self.xx - o.xx, self.yy - o.yy, self.xy - o.xy)
    }
}

/// Symmetric 3x3 tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl SymTensor3 {
    pub fn new(xx: f64, yy: f64, zz: f64, xy: f64, xz: f64, yz: f64) -> Self {
        Self { xx, yy, zz, xy, xz, yz }
    }

    /// Conjugation R A R^T for a general rotation matrix given by rows.
    pub fn rotate(self, r: [[f64; 3]; 3]) -> Self {
        let a = [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ];
        let mut ra = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    ra[i][j] += r[i][k] * a[k][j];
                }
            }
        }
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j] += ra[i][k] * r[j][k];
                }
            }
        }
        Self::new(out[0][0], out[1][1], out[2][2], out[0][1], out[0][2], out[1][2])
    }
}

impl SymTensor for SymTensor3 {
    fn zero() -> Self {
        Self::default()
    }

    fn dot(self, o: Self) -> f64 {
        self.xx * o.xx
            + self.yy * o.yy
            + self.zz * o.zz
            + 2.0 * (self.xy * o.xy + self.xz * o.xz + self.yz * o.yz)
    }

    fn scale(self, k: f64) -> Self {
        Self::new(
            self.xx * k,
            self.yy * k,
            self.zz * k,
            self.xy * k,
            self.xz * k,
            self.yz * k,
        )
    }

    fn add(self, o: Self) -> Self {
        Self::new(
            self.xx + o.xx,
            self.yy + o.yy,
            self.zz + o.zz,
            self.xy + o.xy,
            self.xz + o.xz,
            self.yz + o.yz,
        )
    }

    fn sub(self, o: Self) -> Self {
        Self::new(
            self.xx - o.xx,
            self.yy - o.yy,
            self.zz - o.zz,
            self.xy - o.xy,
            self.xz - o.xz,
            self.yz - o.yz,
        )
    }
}
