//! Internal dense numerical kernels.
//!
//! Factorizations come from nalgebra; this module adds the pieces it lacks:
//! a 2-norm condition estimate for symmetric matrices, a minimum-norm solve
//! through the symmetric eigendecomposition, Lawson-Hanson nonnegative least
//! squares, Euclidean projection onto the probability simplex, and a log-log
//! least-squares line fit.

use nalgebra::{DMatrix, DVector};

/// Solves `a x = b` by a dense factorization plus one step of iterative
/// refinement. Returns the solution and the max-norm residual of `a x - b`,
/// or `None` when the factorization hits an exactly singular pivot.
///
/// Tries Cholesky first (half the flops of LU, and most kernels here are
/// positive definite); an indefinite matrix fails that attempt quickly and
/// falls back to LU with partial pivoting.
pub(crate) fn solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    if let Some(chol) = a.clone().cholesky() {
        let mut x = chol.solve(b);
        // One refinement pass is enough to push the residual of a
        // well-conditioned solve to a few ulps of ||a|| ||x||.
        let r = b - a * &x;
        x += chol.solve(&r);
        let resid = (b - a * &x).amax();
        return Some((x, resid));
    }
    let lu = a.clone().lu();
    let mut x = lu.solve(b)?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let resid = (b - a * &x).amax();
    Some((x, resid))
}

/// Estimates the 2-norm condition number of a symmetric matrix from the
/// largest and smallest eigenvalue magnitudes, found by power iteration and
/// inverse iteration through a factorization solve (Cholesky when the matrix
/// admits one, LU otherwise). Returns `f64::INFINITY` when the matrix is
/// numerically singular.
pub(crate) fn condition_estimate_symmetric(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 1 {
        return 1.0;
    }
    let lambda_max = extreme_eigenvalue_magnitude(|v| a * v, n);
    if lambda_max == 0.0 {
        return f64::INFINITY;
    }
    let chol = a.clone().cholesky();
    let lu = if chol.is_none() {
        Some(a.clone().lu())
    } else {
        None
    };
    let mut ok = true;
    let inv_lambda_min = extreme_eigenvalue_magnitude(
        |v| match &chol {
            Some(c) => c.solve(v),
            None => lu.as_ref().unwrap().solve(v).unwrap_or_else(|| {
                ok = false;
                v.clone()
            }),
        },
        n,
    );
    if !ok || inv_lambda_min == 0.0 || !inv_lambda_min.is_finite() {
        return f64::INFINITY;
    }
    lambda_max * inv_lambda_min
}

/// Largest eigenvalue magnitude of a symmetric operator via power iteration
/// from a fixed deterministic start.
fn extreme_eigenvalue_magnitude<F: FnMut(&DVector<f64>) -> DVector<f64>>(
    mut apply: F,
    n: usize,
) -> f64 {
    // A start with unequal, sign-mixed entries to avoid being orthogonal to
    // the leading eigenvector for the structured matrices we meet in practice.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + (i as f64) * 0.618 % 1.0)
        .map(|x| if x > 1.5 { -x } else { x });
    let mut norm = v.norm();
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..60 {
        let w = apply(&v);
        norm = w.norm();
        if !norm.is_finite() {
            return f64::INFINITY;
        }
        if norm == 0.0 {
            return 0.0;
        }
        let next = w / norm;
        let delta = (lambda - norm).abs();
        lambda = norm;
        v = next;
        if delta <= 1e-12 * lambda {
            break;
        }
    }
    lambda
}

/// Minimum-norm solution of a symmetric (possibly singular) system through the
/// eigendecomposition, zeroing eigenvalues below `rel_cutoff` times the
/// largest magnitude. Returns the solution and its max-norm residual.
pub(crate) fn min_norm_symmetric(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    rel_cutoff: f64,
) -> (DVector<f64>, f64) {
    let eig = a.clone().symmetric_eigen();
    let max_mag = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let cutoff = rel_cutoff * max_mag;
    let qtb = eig.eigenvectors.transpose() * b;
    let scaled = DVector::from_fn(b.len(), |i, _| {
        let l = eig.eigenvalues[i];
        if l.abs() > cutoff {
            qtb[i] / l
        } else {
            0.0
        }
    });
    let x = &eig.eigenvectors * scaled;
    let resid = (b - a * &x).amax();
    (x, resid)
}

/// Whether the symmetric matrix has all eigenvalues at or above `-floor`,
/// decided by attempting a Cholesky factorization of `a + floor * I`.
pub(crate) fn psd_within_floor(a: &DMatrix<f64>, floor: f64) -> bool {
    let mut shifted = a.clone();
    for i in 0..a.nrows() {
        shifted[(i, i)] += floor;
    }
    shifted.cholesky().is_some()
}

/// Lawson-Hanson nonnegative least squares: minimizes `||a x - b||_2` over
/// `x >= 0`. Returns the minimizer and the max-norm residual of `a x - b`.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive: Vec<usize> = Vec::new();
    let mut in_passive = vec![false; n];
    let scale = a.amax().max(1.0) * b.amax().max(1.0);
    let grad_tol = 1e-12 * scale;
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        // Gradient of 1/2 ||ax - b||^2 is a^T (a x - b); descend where it is
        // negative among the zero-clamped coordinates.
        let r = b - a * &x;
        let g = a.transpose() * &r;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !in_passive[j] && g[j] > grad_tol && best.is_none_or(|(_, v)| g[j] > v) {
                best = Some((j, g[j]));
            }
        }
        let Some((enter, _)) = best else { break };
        passive.push(enter);
        in_passive[enter] = true;

        // Inner loop: solve the unconstrained problem on the passive set and
        // walk back until the passive coordinates are all positive.
        loop {
            let Some(z) = least_squares_on(a, b, &passive) else {
                // Degenerate passive set; drop the newest column and give up
                // on this direction.
                if let Some(j) = passive.pop() {
                    in_passive[j] = false;
                }
                break;
            };
            if z.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in passive.iter().enumerate() {
                    x[j] = z[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in passive.iter().enumerate() {
                if z[k] <= 0.0 {
                    let denom = x[j] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            if !alpha.is_finite() {
                break;
            }
            for (k, &j) in passive.iter().enumerate() {
                x[j] += alpha * (z[k] - x[j]);
            }
            let eps = 1e-14 * scale.max(1.0);
            let mut k = 0;
            while k < passive.len() {
                let j = passive[k];
                if x[j] <= eps {
                    x[j] = 0.0;
                    in_passive[j] = false;
                    passive.swap_remove(k);
                } else {
                    k += 1;
                }
            }
            if passive.is_empty() {
                break;
            }
        }
    }
    let resid = (b - a * &x).amax();
    (x, resid)
}

/// Unconstrained least squares restricted to the given columns, via QR.
/// Returns `None` when the restricted matrix is numerically rank deficient.
fn least_squares_on(a: &DMatrix<f64>, b: &DVector<f64>, cols: &[usize]) -> Option<DVector<f64>> {
    let m = a.nrows();
    let k = cols.len();
    let sub = DMatrix::from_fn(m, k, |i, c| a[(i, cols[c])]);
    let qr = sub.qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    if diag_max == 0.0 {
        return None;
    }
    for i in 0..k {
        if r[(i, i)].abs() < 1e-13 * diag_max {
            return None;
        }
    }
    let qtb = qr.q().transpose() * b;
    let mut z = DVector::zeros(k);
    for i in (0..k).rev() {
        let mut s = qtb[i];
        for j in (i + 1)..k {
            s -= r[(i, j)] * z[j];
        }
        z[i] = s / r[(i, i)];
    }
    Some(z)
}

/// Euclidean projection of `v` onto the probability simplex.
pub(crate) fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        acc += u;
        let candidate = (acc - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    v.iter().map(|&u| (u - theta).max(0.0)).collect()
}

/// Ordinary least squares fit of `y = slope * x + intercept`, returning
/// `(slope, intercept, r_squared, max_abs_residual)`.
pub(crate) fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let mut ss_res = 0.0;
    let mut max_resid = 0.0f64;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (slope * x + intercept);
        ss_res += r * r;
        max_resid = max_resid.max(r.abs());
    }
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2, max_resid)
}

/// True when the sorted index set of `a` precedes that of `b` lexicographically
/// (the lowest index where they differ belongs to `a`).
pub(crate) fn lex_smaller_mask(a: u32, b: u32) -> bool {
    let d = a ^ b;
    if d == 0 {
        return false;
    }
    let lowest = d & d.wrapping_neg();
    a & lowest != 0
}
