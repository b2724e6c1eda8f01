//! Matrix-free preconditioned conjugate gradient.
//!
//! All operators in this crate are symmetric positive (semi)definite and
//! cheap to apply, so CG with an optional Jacobi preconditioner covers
//! every linear solve: the Neumann Poisson problem of the projection, the
//! Helmholtz systems of the momentum update, and the backward-Euler
//! pore-pressure diffusion. Convergence is declared on the infinity norm
//! of the residual, which is the quantity the divergence guarantee is
//! stated in.

use super::SolverError;

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    pub residual_inf: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn subtract_mean(a: &mut [f64]) {
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    for x in a.iter_mut() {
        *x -= mean;
    }
}

/// Solves A x = rhs for symmetric positive (semi)definite A.
///
/// * `apply`: writes A·input into the output slice.
/// * `x`: warm start on entry, solution on exit.
/// * `inv_diag`: optional Jacobi preconditioner (reciprocal diagonal of A).
/// * `remove_mean`: project constants out of rhs, iterates and solution;
///   required when A has the constant nullspace (pure Neumann operators).
/// * `tol_inf`: absolute stopping threshold on the residual infinity norm.
///
/// The iteration cap is 10x the unknown count; running past it returns
/// [`SolverError::LinearSolve`] with the label and last residual.
pub fn conjugate_gradient(
    label: &'static str,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    rhs: &[f64],
    x: &mut [f64],
    inv_diag: Option<&[f64]>,
    remove_mean: bool,
    tol_inf: f64,
) -> Result<CgOutcome, SolverError> {
    let n = rhs.len();
    assert_eq!(x.len(), n, "warm start length mismatch");
    assert!(tol_inf > 0.0, "tolerance must be positive");

    // An identically zero right-hand side has the exact solution zero;
    // returning it exactly keeps rest states at rest to the last bit.
    if !remove_mean && rhs.iter().all(|&r| r == 0.0) {
        x.fill(0.0);
        return Ok(CgOutcome { iterations: 0, residual_inf: 0.0 });
    }

    let mut b = rhs.to_vec();
    if remove_mean {
        subtract_mean(&mut b);
        subtract_mean(x);
    }

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = b[i] - ap[i];
    }
    if remove_mean {
        subtract_mean(&mut r);
    }

    let precondition = |r: &[f64], z: &mut Vec<f64>| {
        match inv_diag {
            Some(d) => {
                z.clear();
                z.extend(r.iter().zip(d).map(|(ri, di)| ri * di));
            }
            None => {
                z.clear();
                z.extend_from_slice(r);
            }
        }
    };

    let mut z = Vec::with_capacity(n);
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    let max_iter = 10 * n;
    let mut residual = inf_norm(&r);
    for iter in 0..=max_iter {
        if residual <= tol_inf {
            if remove_mean {
                subtract_mean(x);
            }
            return Ok(CgOutcome { iterations: iter, residual_inf: residual });
        }
        if iter == max_iter {
            break;
        }

        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            // Search direction fell into the nullspace or the operator
            // lost definiteness; either way progress has stalled.
            return Err(SolverError::LinearSolve {
                label,
                iterations: iter,
                residual,
                tol: tol_inf,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if remove_mean {
            subtract_mean(&mut r);
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        residual = inf_norm(&r);
    }

    Err(SolverError::LinearSolve { label, iterations: max_iter, residual, tol: tol_inf })
}

/// CG with a general symmetric positive definite preconditioner and a
/// stopping rule on the preconditioned residual energy r' M^-1 r.
///
/// * `precondition`: writes M^-1 · input into the output slice.
/// * `tol_rel`: stop once r' M^-1 r <= tol_rel^2 * (rhs' M^-1 rhs).
///
/// The momentum solve needs both features. Its wall rows are Newton
/// linearizations of the slip law with diagonal entries up to ~1e15, in two
/// ways: the plain residual there cannot drop below eps * |row scale| even
/// at the exact solution, and the stiff row pair leaves a near-null
/// direction that a pointwise Jacobi scaling mangles. Measuring the
/// residual in the M^-1 norm discounts that rounding floor by exactly the
/// row stiffness, and the caller's preconditioner inverts the wall pairs as
/// 2x2 blocks.
pub fn conjugate_gradient_pc(
    label: &'static str,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    mut precondition: impl FnMut(&[f64], &mut [f64]),
    rhs: &[f64],
    x: &mut [f64],
    tol_rel: f64,
) -> Result<CgOutcome, SolverError> {
    let n = rhs.len();
    assert_eq!(x.len(), n, "warm start length mismatch");
    assert!(tol_rel > 0.0 && tol_rel < 1.0, "relative tolerance must lie in (0, 1)");

    if rhs.iter().all(|&r| r == 0.0) {
        x.fill(0.0);
        return Ok(CgOutcome { iterations: 0, residual_inf: 0.0 });
    }

    let mut z = vec![0.0; n];
    precondition(rhs, &mut z);
    let target = tol_rel * tol_rel * dot(rhs, &z);
    assert!(target > 0.0, "preconditioner lost definiteness on the right-hand side");

    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    for i in 0..n {
        r[i] = rhs[i] - ap[i];
    }
    precondition(&r, &mut z);
    let mut rz = dot(&r, &z);
    let mut p = z.clone();

    let max_iter = 10 * n;
    for iter in 0..=max_iter {
        if rz <= target {
            return Ok(CgOutcome { iterations: iter, residual_inf: inf_norm(&r) });
        }
        if iter == max_iter {
            break;
        }

        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(SolverError::LinearSolve {
                label,
                iterations: iter,
                residual: rz.max(0.0).sqrt(),
                tol: target.sqrt(),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    Err(SolverError::LinearSolve {
        label,
        iterations: max_iter,
        residual: rz.max(0.0).sqrt(),
        tol: target.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Dense SPD test operator A = M^T M + I.
    fn dense_spd(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let m: Vec<Vec<f64>> =
            (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += m[k][i] * m[k][j];
                }
                a[i][j] = s + if i == j { 1.0 } else { 0.0 };
            }
        }
        a
    }

    fn apply_dense(a: &[Vec<f64>]) -> impl FnMut(&[f64], &mut [f64]) + '_ {
        move |x, out| {
            for (i, row) in a.iter().enumerate() {
                out[i] = row.iter().zip(x).map(|(aij, xj)| aij * xj).sum();
            }
        }
    }

    #[test]
    fn solves_random_spd_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let a = dense_spd(n, &mut rng);
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut rhs = vec![0.0; n];
        apply_dense(&a)(&x_true, &mut rhs);

        let mut x = vec![0.0; n];
        let out = conjugate_gradient("test", apply_dense(&a), &rhs, &mut x, None, false, 1e-12)
            .unwrap();
        assert!(out.residual_inf <= 1e-12);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-9, "component {i} off");
        }
    }

    #[test]
    fn warm_start_at_solution_returns_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 20;
        let a = dense_spd(n, &mut rng);
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut rhs = vec![0.0; n];
        apply_dense(&a)(&x_true, &mut rhs);

        let mut x = x_true.clone();
        let out = conjugate_gradient("test", apply_dense(&a), &rhs, &mut x, None, false, 1e-10)
            .unwrap();
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn zero_rhs_yields_exact_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = dense_spd(10, &mut rng);
        let rhs = vec![0.0; 10];
        let mut x = vec![0.3; 10]; // stale warm start must be discarded
        let out =
            conjugate_gradient("test", apply_dense(&a), &rhs, &mut x, None, false, 1e-14).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(x.iter().all(|&xi| xi == 0.0));
    }

    #[test]
    fn jacobi_preconditioner_handles_wild_diagonal_scaling() {
        // Diagonal entries spanning 12 orders of magnitude plus a weak
        // off-diagonal coupling; plain CG would crawl here.
        let n = 50;
        let mut diag = vec![0.0; n];
        for i in 0..n {
            diag[i] = 10f64.powi((i % 13) as i32);
        }
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] } else { 0.0 };
                out[i] = diag[i] * x[i] + 0.1 * (left + right);
            }
        };
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut rhs = vec![0.0; n];
        apply(&x_true, &mut rhs);

        let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
        let mut x = vec![0.0; n];
        let out = conjugate_gradient("test", apply, &rhs, &mut x, Some(&inv_diag), false, 1e-10)
            .unwrap();
        assert!(out.iterations < 200, "took {} iterations", out.iterations);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-7 * (1.0 + x_true[i].abs()));
        }
    }

    #[test]
    fn singular_neumann_operator_with_mean_removal() {
        // 1D periodic-free Laplacian (Neumann): nullspace of constants.
        let n = 30;
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
                out[i] = -(right - left);
            }
        };
        // rhs = A(x_true) for a known zero-mean x_true.
        let mut x_true: Vec<f64> =
            (0..n).map(|i| ((i as f64) * 0.37).sin() + 0.1 * i as f64).collect();
        subtract_mean(&mut x_true);
        let mut rhs = vec![0.0; n];
        apply(&x_true, &mut rhs);

        let mut x = vec![0.0; n];
        let out =
            conjugate_gradient("test", apply, &rhs, &mut x, None, true, 1e-11).unwrap();
        assert!(out.residual_inf <= 1e-11);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-8, "component {i}");
        }
        // Solution is pinned to zero mean.
        assert!(x.iter().sum::<f64>().abs() / n as f64 <= 1e-12);
    }

    #[test]
    fn reports_failure_past_iteration_cap() {
        // Tolerance far below what the arithmetic can reach forces the cap.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = dense_spd(8, &mut rng);
        let rhs: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut x = vec![0.0; 8];
        let err = conjugate_gradient("test", apply_dense(&a), &rhs, &mut x, None, false, 1e-300)
            .unwrap_err();
        match err {
            SolverError::LinearSolve { label, .. } => assert_eq!(label, "test"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn energy_norm_variant_solves_with_identity_preconditioner() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 30;
        let a = dense_spd(n, &mut rng);
        let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut rhs = vec![0.0; n];
        apply_dense(&a)(&x_true, &mut rhs);

        let mut x = vec![0.0; n];
        let identity = |r: &[f64], z: &mut [f64]| z.copy_from_slice(r);
        conjugate_gradient_pc("test", apply_dense(&a), identity, &rhs, &mut x, 1e-12).unwrap();
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-9, "component {i} off");
        }

        let rhs0 = vec![0.0; n];
        let mut stale = vec![0.7; n];
        let out =
            conjugate_gradient_pc("test", apply_dense(&a), identity, &rhs0, &mut stale, 1e-12)
                .unwrap();
        assert_eq!(out.iterations, 0);
        assert!(stale.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn block_preconditioner_handles_a_stiff_penalty_pair() {
        // Tridiagonal base plus a rank-1 penalty c*(1.5 e0 - 0.5 e1) pattern
        // on the first two entries, the structure of a sticking wall row.
        // The penalized pair has a 1e13 diagonal whose rounding noise no
        // plain residual tolerance can get under.
        let n = 64;
        let c = 1e13;
        let base = 1.0;
        let apply = move |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] } else { 0.0 };
                out[i] = (base + 2.0) * x[i] - left - right;
            }
            let w = 1.5 * x[0] - 0.5 * x[1];
            out[0] += 1.5 * c * w;
            out[1] -= 0.5 * c * w;
        };
        // Exact 2x2 inverse on the pair, reciprocal diagonal elsewhere.
        let d0 = base + 2.0 + 2.25 * c;
        let d1 = base + 2.0 + 0.25 * c;
        let off = -1.0 - 0.75 * c;
        let det = d0 * d1 - off * off;
        let precond = move |r: &[f64], z: &mut [f64]| {
            for i in 0..n {
                z[i] = r[i] / (base + 2.0);
            }
            z[0] = (d1 * r[0] - off * r[1]) / det;
            z[1] = (d0 * r[1] - off * r[0]) / det;
        };

        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // A stiff pair only ever coexists with a pinned wall value: put the
        // penalized combination at the scale the penalty would hold it.
        // An O(1) combination would make the penalty rows dominate the
        // preconditioned rhs energy and the relative target meaningless.
        let w_true = 2e-13;
        x_true[0] = (0.5 * x_true[1] + w_true) / 1.5;
        let mut rhs = vec![0.0; n];
        apply(&x_true, &mut rhs);

        let mut x = vec![0.0; n];
        let out = conjugate_gradient_pc("test", apply, precond, &rhs, &mut x, 1e-10).unwrap();
        assert!(out.iterations < 150, "took {} iterations", out.iterations);
        for i in 2..n {
            assert!((x[i] - x_true[i]).abs() < 1e-6, "interior component {i}");
        }
        // The stiff pair is resolved in the penalty-weighted sense: the
        // extrapolated value 1.5 x0 - 0.5 x1 is what the penalty pins.
        let w = 1.5 * x[0] - 0.5 * x[1];
        assert!((w - w_true).abs() < 1e-13, "wall combination off by {}", (w - w_true).abs());
    }
}
