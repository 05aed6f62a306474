//! Shared generators and independent oracles for integration tests.
//!
//! The oracles here deliberately avoid the library's own numerics: plain
//! Gaussian elimination instead of the refined solvers, direct `powf`
//! formulas instead of the shifted mean evaluation, and closed forms where
//! they exist. Agreement is evidence, not circularity.

#![allow(dead_code)]

use maxdiv_core::{Measure, Metric, SimilaritySpace};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dirichlet(1,...,1) sample: normalized exponentials.
pub fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Measure {
    let mut w: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Measure::new(w).unwrap()
}

/// Random point cloud in `[0, extent]^dim` with Euclidean similarities.
pub fn random_points_space(
    rng: &mut ChaCha8Rng,
    n: usize,
    dim: usize,
    extent: f64,
) -> SimilaritySpace {
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>() * extent).collect())
        .collect();
    SimilaritySpace::from_points(&pts, Metric::Euclidean, 1.0, None).unwrap()
}

/// Random distance matrix with off-diagonal entries in [1, 2]: any such
/// matrix satisfies the triangle inequality outright.
pub fn random_metric_matrix_space(rng: &mut ChaCha8Rng, n: usize) -> SimilaritySpace {
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 1.0 + rng.gen::<f64>();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    SimilaritySpace::from_distances(d, 1.0, None).unwrap()
}

/// Gaussian elimination with partial pivoting; independent of nalgebra.
#[allow(clippy::needless_range_loop)] // indexed form mirrors the usual notation
pub fn gauss_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| a[(i, j)]).collect();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p.abs() > 1e-14, "singular system in oracle");
        for row in (col + 1)..n {
            let factor = m[row][col] / p;
            for k in col..=n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = m[i][n];
        for j in (i + 1)..n {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    x
}

/// Uniform grid of `n` points on [0, 1] as a 1-d point cloud.
pub fn line_grid_points(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| vec![i as f64 / (n - 1) as f64])
        .collect()
}

pub fn line_grid_space(n: usize, scale: f64) -> SimilaritySpace {
    SimilaritySpace::from_points(&line_grid_points(n), Metric::Euclidean, scale, None).unwrap()
}

/// Closed-form magnitude of the uniform `n`-point grid on [0, 1] scaled by
/// `t`: successive gaps h = t/(n-1) give 1 + (n-1) tanh(h/2).
pub fn line_grid_magnitude(n: usize, t: f64) -> f64 {
    let h = t / (n - 1) as f64;
    1.0 + (n - 1) as f64 * (h / 2.0).tanh()
}

/// Diversity of order `q` by the direct textbook formula (finite `q` only,
/// `q != 1`); no shifting, no clamping.
pub fn naive_diversity(space: &SimilaritySpace, mu: &Measure, q: f64) -> f64 {
    let k = space.kernel();
    let n = space.n();
    let w = mu.weights();
    let km: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| k[(i, j)] * w[j]).sum())
        .collect();
    if (q - 1.0).abs() < 1e-12 {
        let mut acc = 0.0;
        for i in 0..n {
            if w[i] > 0.0 {
                acc -= w[i] * km[i].ln();
            }
        }
        return acc.exp();
    }
    let mut acc = 0.0;
    for i in 0..n {
        if w[i] > 0.0 {
            acc += w[i] * km[i].powf(q - 1.0);
        }
    }
    acc.powf(1.0 / (1.0 - q))
}

/// Total-variation distance between two weight vectors.
pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / 2.0
}
