//! Pointwise constitutive maps: pressure-activated yield stress, the
//! regularized plastic and viscous parts of the deviatoric stress, and the
//! regularized threshold slip law for the container walls.
//!
//! All maps are radial (they scale the input direction by a function of its
//! magnitude), which makes them frame-indifferent and monotone. `reg_n` is
//! the regularization index: larger values sharpen the regularized maps
//! toward their set-valued limits at rate 1/reg_n.

use crate::tensor::SymTensor;
use thiserror::Error;

/// Floor for |D| inside the power-law prefactor, which is singular at the
/// origin for q_exponent < 2 with delta_star = 0.
const PREFACTOR_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
#[error("invalid rheology parameter: {0}")]
pub struct InvalidParameter(pub String);

/// Bulk material parameters.
///
/// Defaults are the normalized values (consistency 2*nu_star = 1,
/// activation threshold 0, yield coefficient 1, quadratic growth).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RheologyParams {
    /// Half the Newtonian consistency: the viscous stress carries 2*nu_star.
    pub nu_star: f64,
    /// Strain-rate activation threshold of the viscous part.
    pub delta_star: f64,
    /// Yield coefficient multiplying the effective pressure.
    pub q_star: f64,
    /// Growth exponent of the viscous part (2 = Newtonian).
    pub q_exponent: f64,
    /// Regularization index shared by all regularized maps.
    pub reg_n: u64,
}

impl Default for RheologyParams {
    fn default() -> Self {
        Self { nu_star: 0.5, delta_star: 0.0, q_star: 1.0, q_exponent: 2.0, reg_n: 1 }
    }
}

impl RheologyParams {
    pub fn validate(&self) -> Result<(), InvalidParameter> {
        if !self.nu_star.is_finite() || self.nu_star <= 0.0 {
            return Err(InvalidParameter(format!("nu_star = {} must be > 0", self.nu_star)));
        }
        if !self.delta_star.is_finite() || self.delta_star < 0.0 {
            return Err(InvalidParameter(format!("delta_star = {} must be >= 0", self.delta_star)));
        }
        if !self.q_star.is_finite() || self.q_star < 0.0 {
            return Err(InvalidParameter(format!("q_star = {} must be >= 0", self.q_star)));
        }
        if !self.q_exponent.is_finite() || self.q_exponent <= 1.0 {
            return Err(InvalidParameter(format!("q_exponent = {} must be > 1", self.q_exponent)));
        }
        if self.reg_n < 1 {
            return Err(InvalidParameter("reg_n must be >= 1".into()));
        }
        Ok(())
    }
}

/// Wall slip parameters: traction threshold, activation speed, and the
/// linear drag coefficient beyond activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipParams {
    pub s_star: f64,
    pub beta_star: f64,
    pub gamma_star: f64,
}

impl Default for SlipParams {
    fn default() -> Self {
        Self { s_star: 0.0, beta_star: 0.0, gamma_star: 1.0 }
    }
}

impl SlipParams {
    pub fn validate(&self) -> Result<(), InvalidParameter> {
        for (name, v) in [
            ("s_star", self.s_star),
            ("beta_star", self.beta_star),
            ("gamma_star", self.gamma_star),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(InvalidParameter(format!("{name} = {v} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Deviatoric stress split into its plastic and viscous parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressSplit<T> {
    pub plastic: T,
    pub viscous: T,
    pub total: T,
}

/// Yield stress activated by the effective pressure:
/// q_star * (p_s - p_f)^+. Zero whenever the pore pressure reaches the
/// lithostatic pressure (fluidization).
pub fn yield_stress(p_s: f64, p_f: f64, q_star: f64) -> f64 {
    q_star * (p_s - p_f).max(0.0)
}

/// Regularized plastic stress tau * D / (|D| + 1/reg_n).
///
/// Bounded by tau for every strain rate; approaches the set-valued plastic
/// branch as reg_n grows.
pub fn plastic_stress_reg<T: SymTensor>(d: T, tau: f64, reg_n: u64) -> T {
    debug_assert!(tau >= 0.0, "yield stress must be nonnegative");
    let norm = d.norm();
    d.scale(tau / (norm + 1.0 / reg_n as f64))
}

/// Activated power-law viscous stress
/// 2*nu_star * |D|^(q-2) * (|D| - delta_star)^+ * D/|D|.
///
/// Returns zero at D = 0 and below the activation threshold. For
/// q_exponent < 2 the prefactor magnitude is evaluated with |D| floored at
/// 1e-14 so the map stays finite near the origin.
pub fn viscous_stress_activated<T: SymTensor>(
    d: T,
    nu_star: f64,
    delta_star: f64,
    q_exponent: f64,
) -> T {
    let norm = d.norm();
    let activated = norm - delta_star;
    if activated <= 0.0 || norm == 0.0 {
        return T::zero();
    }
    let m = norm.max(PREFACTOR_FLOOR);
    let factor = 2.0 * nu_star * m.powf(q_exponent - 2.0) * activated / norm;
    d.scale(factor)
}

/// Total deviatoric stress at a point, split into parts.
pub fn total_stress<T: SymTensor>(
    d: T,
    p_f: f64,
    p_s: f64,
    params: &RheologyParams,
) -> StressSplit<T> {
    let tau = yield_stress(p_s, p_f, params.q_star);
    let plastic = plastic_stress_reg(d, tau, params.reg_n);
    let viscous = viscous_stress_activated(d, params.nu_star, params.delta_star, params.q_exponent);
    StressSplit { plastic, viscous, total: plastic.add(viscous) }
}

/// Residual of the implicit plastic relation (|Z| - tau)^+ + ||D|Z - tau*D|.
///
/// Vanishes exactly on the set-valued plastic branch; for the regularized
/// stress it is bounded by tau/reg_n.
pub fn bulk_implicit_residual<T: SymTensor>(z: T, d: T, tau: f64) -> f64 {
    let overshoot = (z.norm() - tau).max(0.0);
    let misalignment = z.scale(d.norm()).sub(d.scale(tau)).norm();
    overshoot + misalignment
}

/// Coefficient c(m) >= 0 with slip_traction_reg(v) = c(|v|) * v.
///
/// Exposed separately because the momentum solver folds it into the
/// implicit diagonal of the wall-adjacent rows.
pub fn slip_coefficient(speed: f64, slip: &SlipParams, reg_n: u64) -> f64 {
    debug_assert!(speed >= 0.0);
    let threshold_part = slip.s_star / (speed + 1.0 / reg_n as f64);
    let drag_part = if speed > slip.beta_star {
        slip.gamma_star * (speed - slip.beta_star) / speed
    } else {
        0.0
    };
    threshold_part + drag_part
}

/// Derivative of the scalar slip law m(s) = slip_coefficient(s, ..) * s
/// with respect to the speed s >= 0:
///
///   m'(s) = s_star * (1/reg_n) / (s + 1/reg_n)^2
///         + gamma_star * [s >= beta_star].
///
/// Nonnegative because m is nondecreasing, which keeps the Newton-
/// linearized wall rows of the momentum operator positive semidefinite.
/// The drag branch uses the right derivative at the activation kink, so an
/// iterate resting exactly at beta_star (in particular at rest when
/// beta_star = 0) already sees the drag slope.
pub fn slip_tangent(speed: f64, slip: &SlipParams, reg_n: u64) -> f64 {
    debug_assert!(speed >= 0.0);
    let eps = 1.0 / reg_n as f64;
    let threshold_part = slip.s_star * eps / ((speed + eps) * (speed + eps));
    let drag_part = if speed >= slip.beta_star { slip.gamma_star } else { 0.0 };
    threshold_part + drag_part
}

/// Regularized wall traction
/// s_star * v/(|v| + 1/reg_n) + gamma_star * (|v| - beta_star)^+ * v/|v|.
pub fn slip_traction_reg(v_tau: [f64; 2], slip: &SlipParams, reg_n: u64) -> [f64; 2] {
    let speed = (v_tau[0] * v_tau[0] + v_tau[1] * v_tau[1]).sqrt();
    let c = slip_coefficient(speed, slip, reg_n);
    [c * v_tau[0], c * v_tau[1]]
}

/// Residual of the implicit slip relation (|z| - s_star)^+ + ||v|z - s_star*v|.
pub fn slip_implicit_residual(z: [f64; 2], v_tau: [f64; 2], s_star: f64) -> f64 {
    let zn = (z[0] * z[0] + z[1] * z[1]).sqrt();
    let vn = (v_tau[0] * v_tau[0] + v_tau[1] * v_tau[1]).sqrt();
    let mx = vn * z[0] - s_star * v_tau[0];
    let my = vn * z[1] - s_star * v_tau[1];
    (zn - s_star).max(0.0) + (mx * mx + my * my).sqrt()
}
