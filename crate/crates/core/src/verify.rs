//! Self-contained verification properties behind the `verify` command.
//!
//! Each property draws its own seeded random inputs, measures the worst
//! case it saw, and reports pass or fail against bounds that are stated
//! in closed form where one exists. Two invocations produce identical
//! reports. The heavy entry is the manufactured-solution order study; the
//! rest run in fractions of a second.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{cell_magnitude, lemma_harness, linf_truncate, mms_error};
use crate::analysis::{truncation_level_select, ErrorNorm, SyntheticFamily};
use crate::fields::{velocity_gradient_norm, Grid, VectorField};
use crate::rheology::{bulk_implicit_residual, plastic_stress_reg, viscous_stress_activated};
use crate::scenarios::{heat_decay, newtonian_mms, run_scenario};
use crate::scenarios::{mms_exact_u, mms_exact_v};
use crate::tensor::{SymTensor, SymTensor2};

/// Verdict and the key numbers of one verification property.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub name: &'static str,
    pub passed: bool,
    /// Labeled measurements in a fixed order, so reports diff cleanly.
    pub metrics: Vec<(&'static str, f64)>,
    /// Set when the property failed, naming what gave way.
    pub failure: Option<String>,
}

impl PropertyReport {
    fn pass(name: &'static str, metrics: Vec<(&'static str, f64)>) -> Self {
        Self { name, passed: true, metrics, failure: None }
    }

    fn fail(name: &'static str, metrics: Vec<(&'static str, f64)>, why: String) -> Self {
        Self { name, passed: false, metrics, failure: Some(why) }
    }
}

/// Runs every property in the fixed reporting order.
pub fn run_property_suite() -> Vec<PropertyReport> {
    vec![
        constitutive_monotonicity(),
        residual_decay(),
        truncation_properties(),
        lemma_decay(),
        mms_orders(),
        heat_decay_oracle(),
    ]
}

/// Symmetric tensor with independent uniform entries in [-s, s].
fn random_sym(rng: &mut ChaCha8Rng, s: f64) -> SymTensor2 {
    SymTensor2::new(
        rng.gen_range(-s..s),
        rng.gen_range(-s..s),
        rng.gen_range(-s..s),
    )
}

/// Trace-free tensor with the given norm and a random orientation.
fn random_deviatoric(rng: &mut ChaCha8Rng, norm: f64) -> SymTensor2 {
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    let a = norm * theta.cos() / std::f64::consts::SQRT_2;
    let b = norm * theta.sin() / std::f64::consts::SQRT_2;
    SymTensor2::new(a, -a, b)
}

/// Worst normalized pairing (Z(D) - Z(Dh)) : (D - Dh) / (|dZ| |dD|) over
/// random pairs; a monotone map keeps this above a rounding floor. Every
/// second pair is a near-coincident one, where cancellation is harshest.
fn monotonicity_worst(
    map: impl Fn(SymTensor2) -> SymTensor2,
    pairs: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut worst = f64::INFINITY;
    for k in 0..pairs {
        let mag = 10f64.powf(rng.gen_range(-3.0..3.0));
        let d1 = random_sym(rng, mag);
        let d2 = if k % 2 == 0 {
            random_sym(rng, mag)
        } else {
            d1.add(random_sym(rng, 1e-8 * mag))
        };
        let dd = d1.sub(d2);
        let dz = map(d1).sub(map(d2));
        let scale = dd.norm() * dz.norm();
        if scale > 0.0 {
            worst = worst.min(dz.dot(dd) / scale);
        }
    }
    worst
}

/// The regularized plastic map and the activated viscous map must both be
/// monotone; any negative pairing beyond rounding is a sign error in the
/// constitutive formulas.
pub fn constitutive_monotonicity() -> PropertyReport {
    const PAIRS: usize = 100_000;
    const FLOOR: f64 = -1e-12;
    let name = "constitutive-monotonicity";
    let mut rng = ChaCha8Rng::seed_from_u64(22);

    let mut worst_plastic = f64::INFINITY;
    for _ in 0..PAIRS / 1000 {
        let tau = rng.gen_range(0.0..5.0);
        let n = 1u64 << rng.gen_range(0..20);
        let w = monotonicity_worst(|d| plastic_stress_reg(d, tau, n), 1000, &mut rng);
        worst_plastic = worst_plastic.min(w);
    }

    let mut worst_viscous = f64::INFINITY;
    for &q in &[1.5, 2.0, 3.0] {
        for _ in 0..PAIRS / 1000 {
            let nu = rng.gen_range(0.1..2.0);
            let delta = rng.gen_range(0.0..0.5);
            let w =
                monotonicity_worst(|d| viscous_stress_activated(d, nu, delta, q), 1000, &mut rng);
            worst_viscous = worst_viscous.min(w);
        }
    }

    let metrics =
        vec![("worst_plastic_pairing", worst_plastic), ("worst_viscous_pairing", worst_viscous)];
    if worst_plastic >= FLOOR && worst_viscous >= FLOOR {
        PropertyReport::pass(name, metrics)
    } else {
        PropertyReport::fail(
            name,
            metrics,
            format!("negative pairing beyond {FLOOR:e}: plastic {worst_plastic:e}, viscous {worst_viscous:e}"),
        )
    }
}

/// The implicit plastic residual of Z_n is tau |D| / (n |D| + 1) in closed
/// form, so it must sit below tau/n and halve (up to the 0.55 guard) with
/// every doubling of n. Sampled strains keep |D| >= 6: the doubling ratio
/// approaches 0.5 only away from |D| = 0.
pub fn residual_decay() -> PropertyReport {
    let name = "residual-decay";
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n_values: Vec<u64> = (0..=8).map(|k| 1u64 << k).collect();

    let mut worst_bound = 0.0f64;
    let mut worst_ratio = 0.0f64;
    for _ in 0..100 {
        let norm = rng.gen_range(6.0..60.0);
        let d = random_deviatoric(&mut rng, norm);
        let tau = rng.gen_range(0.5..5.0);
        let mut prev = None;
        for &n in &n_values {
            let z = plastic_stress_reg(d, tau, n);
            let r = bulk_implicit_residual(z, d, tau);
            worst_bound = worst_bound.max(r * n as f64 / tau);
            if let Some(p) = prev {
                worst_ratio = worst_ratio.max(r / p);
            }
            prev = Some(r);
        }
    }

    let metrics = vec![("worst_residual_times_n_over_tau", worst_bound),
        ("worst_doubling_ratio", worst_ratio)];
    if worst_bound <= 1.0 && worst_ratio <= 0.55 {
        PropertyReport::pass(name, metrics)
    } else {
        PropertyReport::fail(
            name,
            metrics,
            format!("bound {worst_bound:.3} (max 1) or ratio {worst_ratio:.3} (max 0.55) violated"),
        )
    }
}

/// Random smooth fields, rescaled to a known peak magnitude, then cut at
/// a level lambda. The cut field must respect the level exactly, faces
/// whose neighboring cells were already below it must come back bitwise
/// unchanged, and the selected magnitude layer must carry at most 1/N of
/// the diagnostic integral for every layer base N.
pub fn truncation_properties() -> PropertyReport {
    let name = "truncation-properties";
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let g = Grid::unit(16);

    let mut worst_level = 0.0f64; // max magnitude / lambda after the cut
    let mut identity_breaks = 0usize;
    let mut worst_layer = 0.0f64; // max layer integral * N / total
    for _ in 0..1000 {
        let a: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pi = std::f64::consts::PI;
        let mut w = VectorField::from_fn(
            g,
            |x, y| {
                a[0] * (pi * x).sin() * (pi * y).cos()
                    + a[1] * (2.0 * pi * x).cos() * (pi * y).sin()
                    + a[2] * (3.0 * pi * y).cos()
                    + a[3]
            },
            |x, y| {
                a[4] * (pi * x).cos() * (2.0 * pi * y).sin()
                    + a[5] * (pi * (x + y)).sin()
                    + a[6] * (3.0 * pi * x).cos()
                    + a[7]
            },
        );

        let mut peak = 0.0f64;
        for j in 0..g.ny {
            for i in 0..g.nx {
                peak = peak.max(cell_magnitude(&w, i, j));
            }
        }
        let target = 10f64.powf(rng.gen_range(1.4..3.5));
        let factor = target / peak;
        for u in &mut w.u {
            *u *= factor;
        }
        for v in &mut w.v {
            *v *= factor;
        }

        let lambda = target * rng.gen_range(0.2..0.7);
        let t = linf_truncate(&w, lambda);

        let mut below = vec![false; g.cell_count()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let m = cell_magnitude(&t, i, j);
                worst_level = worst_level.max(m / lambda);
                below[g.cell_idx(i, j)] = cell_magnitude(&w, i, j) <= lambda;
            }
        }
        // Identity region: a face is untouched when every cell it belongs
        // to sits at or below the level.
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let left = i == 0 || below[g.cell_idx(i - 1, j)];
                let right = i == g.nx || below[g.cell_idx(i, j)];
                if left && right && t.u_at(i, j).to_bits() != w.u_at(i, j).to_bits() {
                    identity_breaks += 1;
                }
            }
        }
        for j in 0..=g.ny {
            for i in 0..g.nx {
                let down = j == 0 || below[g.cell_idx(i, j - 1)];
                let up = j == g.ny || below[g.cell_idx(i, j)];
                if down && up && t.v_at(i, j).to_bits() != w.v_at(i, j).to_bits() {
                    identity_breaks += 1;
                }
            }
        }

        let mut diag = velocity_gradient_norm(&w);
        for d in &mut diag.data {
            *d *= *d;
        }
        for &base in &[4u32, 8, 16] {
            match truncation_level_select(&w, &diag, base) {
                Ok(sel) => {
                    if sel.total_integral > 0.0 {
                        worst_layer = worst_layer
                            .max(sel.layer_integral * base as f64 / sel.total_integral);
                    }
                }
                Err(e) => {
                    return PropertyReport::fail(
                        name,
                        vec![("worst_magnitude_over_lambda", worst_level)],
                        format!("layer selection degenerated: {e}"),
                    )
                }
            }
        }
    }

    let metrics = vec![
        ("worst_magnitude_over_lambda", worst_level),
        ("identity_breaks", identity_breaks as f64),
        ("worst_layer_fraction_times_base", worst_layer),
    ];
    if worst_level <= 1.0 + 1e-12 && identity_breaks == 0 && worst_layer <= 1.0 + 1e-12 {
        PropertyReport::pass(name, metrics)
    } else {
        PropertyReport::fail(name, metrics, "a truncation guarantee broke".into())
    }
}

/// On the three synthetic convergent families, both implicit residuals
/// must fall with n, monotonically up to 10% noise, and end two orders
/// below where they started.
pub fn lemma_decay() -> PropertyReport {
    let name = "lemma-harness-decay";
    let g = Grid::unit(32);
    let n_values: Vec<u64> = (0..=8).map(|k| 1u64 << k).collect();

    let mut worst_step = 0.0f64; // max r[i+1] / r[i]
    let mut worst_final = 0.0f64; // max r[last] / (1e-2 r[0])
    for family in SyntheticFamily::builtin(g) {
        let rep = lemma_harness(&family, &n_values);
        for series in [&rep.residual_c1, &rep.residual_c3] {
            for pair in series.windows(2) {
                worst_step = worst_step.max(pair[1] / pair[0]);
            }
            worst_final = worst_final.max(series[series.len() - 1] / (1e-2 * series[0]));
        }
    }

    let metrics =
        vec![("worst_step_ratio", worst_step), ("worst_final_over_target", worst_final)];
    if worst_step <= 1.1 && worst_final <= 1.0 {
        PropertyReport::pass(name, metrics)
    } else {
        PropertyReport::fail(
            name,
            metrics,
            format!("step ratio {worst_step:.3} (max 1.1) or final fraction {worst_final:.3} (max 1)"),
        )
    }
}

/// Manufactured-solution L2 velocity errors on 32, 64, and 128 cells per
/// side; both grid-to-grid orders must reach 1.9.
pub fn mms_orders() -> PropertyReport {
    let name = "mms-spatial-order";
    let mut errors = Vec::new();
    for n in [32usize, 64, 128] {
        match run_scenario(&newtonian_mms(n)) {
            Ok(out) => errors.push(mms_error(&out.state, mms_exact_u, mms_exact_v, ErrorNorm::L2)),
            Err(e) => return PropertyReport::fail(name, vec![], format!("run failed: {e}")),
        }
    }
    let order_coarse = (errors[0] / errors[1]).log2();
    let order_fine = (errors[1] / errors[2]).log2();
    let metrics = vec![
        ("l2_error_32", errors[0]),
        ("l2_error_64", errors[1]),
        ("l2_error_128", errors[2]),
        ("order_32_to_64", order_coarse),
        ("order_64_to_128", order_fine),
    ];
    if order_coarse >= 1.9 && order_fine >= 1.9 {
        PropertyReport::pass(name, metrics)
    } else {
        PropertyReport::fail(
            name,
            metrics,
            format!("orders {order_coarse:.3}, {order_fine:.3} below 1.9"),
        )
    }
}

/// The frozen-velocity diffusion run must match its separable solution;
/// delegates to the scenario oracle and reports its margin.
pub fn heat_decay_oracle() -> PropertyReport {
    let name = "heat-decay-oracle";
    match run_scenario(&heat_decay()) {
        Ok(out) => {
            let check = &out.checks[0];
            let metrics =
                vec![("amplitude_deviation", check.measured), ("allowed_band", check.bound)];
            if out.passed() {
                PropertyReport::pass(name, metrics)
            } else {
                PropertyReport::fail(name, metrics, check.label.clone())
            }
        }
        Err(e) => PropertyReport::fail(name, vec![], format!("run failed: {e}")),
    }
}
