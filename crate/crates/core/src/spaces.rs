//! Finite spaces with similarities, and measures on them.
//!
//! A [`SimilaritySpace`] is a finite set of labelled points together with a
//! similarity kernel: a square matrix of nonnegative entries whose diagonal is
//! strictly positive. Spaces built from distances (`K(i, j) = exp(-d(i, j))`)
//! remember their distance matrix, which makes them rescalable: scaling the
//! metric by `t > 0` raises the kernel to the entrywise power `t`.
//!
//! A [`Measure`] is a vector of nonnegative weights on the same index set.
//! Probability measures (total mass 1 within [`PROBABILITY_TOL`]) are required
//! by the diversity and mean operations; general finite measures are accepted
//! where only totals matter.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Absolute tolerance on total mass when a probability measure is required.
pub const PROBABILITY_TOL: f64 = 1e-12;

/// Distance choices for point clouds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Straight-line distance.
    Euclidean,
    /// Sum of coordinate differences.
    L1,
}

impl Metric {
    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

/// A finite labelled set with a similarity kernel.
#[derive(Debug, Clone)]
pub struct SimilaritySpace {
    labels: Vec<String>,
    kernel: DMatrix<f64>,
    /// Present exactly when the kernel was derived as `exp(-d)`; entries may be
    /// `+inf` (which makes the corresponding kernel entry exactly zero).
    distances: Option<DMatrix<f64>>,
    symmetric: bool,
    /// True when the construction guarantees a positive-semidefinite kernel
    /// (point clouds under the provided metrics, which are of negative type,
    /// make `exp(-t d)` PSD for every `t > 0`).
    psd_guaranteed: bool,
}

impl SimilaritySpace {
    /// Builds a space from an explicit kernel matrix.
    ///
    /// The kernel must be square with finite nonnegative entries and a
    /// strictly positive diagonal. The symmetry flag is set by exact entrywise
    /// comparison. `labels` defaults to `"0", "1", ...`.
    pub fn from_kernel(kernel: DMatrix<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        validate_kernel(&kernel)?;
        let labels = check_labels(labels, kernel.nrows())?;
        let symmetric = is_exactly_symmetric(&kernel);
        Ok(SimilaritySpace {
            labels,
            kernel,
            distances: None,
            symmetric,
            psd_guaranteed: false,
        })
    }

    /// Convenience constructor from row vectors.
    pub fn from_kernel_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        for row in rows {
            if row.len() != n {
                return Err(Error::NonSquare {
                    rows: n,
                    cols: row.len(),
                });
            }
        }
        let kernel = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_kernel(kernel, None)
    }

    /// Builds a space from points in `R^k` under the chosen metric, scaled by `t`.
    ///
    /// The kernel is `exp(-t * d(x_i, x_j))`. Duplicate points are allowed.
    pub fn from_points(
        points: &[Vec<f64>],
        metric: Metric,
        scale: f64,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySpace);
        }
        let dim = points[0].len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            for &c in p {
                if !c.is_finite() {
                    return Err(Error::NonFinite {
                        row: i,
                        col: 0,
                        value: c,
                    });
                }
            }
        }
        let n = points.len();
        let mut distances = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = metric.distance(&points[i], &points[j]);
                distances[(i, j)] = d;
                distances[(j, i)] = d;
            }
        }
        let mut space = Self::from_distances(distances, scale, labels)?;
        space.psd_guaranteed = true;
        Ok(space)
    }

    /// Builds a space from a precomputed distance matrix, scaled by `t`.
    ///
    /// Entries must be nonnegative (`+inf` allowed, giving kernel entries of
    /// exactly zero) with a zero diagonal. The triangle inequality is not
    /// checked. An asymmetric matrix is accepted; the symmetry flag of the
    /// resulting space will simply be false.
    pub fn from_distances(
        distances: DMatrix<f64>,
        scale: f64,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if distances.nrows() != distances.ncols() {
            return Err(Error::NonSquare {
                rows: distances.nrows(),
                cols: distances.ncols(),
            });
        }
        if distances.nrows() == 0 {
            return Err(Error::EmptySpace);
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::NonpositiveScale { value: scale });
        }
        let n = distances.nrows();
        for i in 0..n {
            for j in 0..n {
                let d = distances[(i, j)];
                if d.is_nan() || d < 0.0 {
                    return Err(Error::NonmetricDistances {
                        detail: format!("entry {d} at ({i}, {j})"),
                    });
                }
            }
            if distances[(i, i)] != 0.0 {
                return Err(Error::NonmetricDistances {
                    detail: format!("nonzero diagonal {} at index {i}", distances[(i, i)]),
                });
            }
        }
        let labels = check_labels(labels, n)?;
        // Store the scaled distances so that `kernel == exp(-distances)` is an
        // exact invariant; rescaling then multiplies distances and
        // re-exponentiates, which is bit-identical to building at the product
        // scale directly.
        let scaled = distances.map(|d| scale * d);
        let kernel = scaled.map(|d| (-d).exp());
        let symmetric = is_exactly_symmetric(&kernel);
        Ok(SimilaritySpace {
            labels,
            kernel,
            distances: Some(scaled),
            symmetric,
            psd_guaranteed: false,
        })
    }

    /// Returns the space scaled by `t`: distances multiply by `t`, so the
    /// kernel becomes its entrywise `t`-th power.
    ///
    /// Only spaces that carry distances can be scaled.
    pub fn scale(&self, t: f64) -> Result<Self> {
        let distances = self.distances.as_ref().ok_or(Error::NotMetricOrigin)?;
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::NonpositiveScale { value: t });
        }
        let scaled = distances.map(|d| t * d);
        let kernel = scaled.map(|d| (-d).exp());
        let symmetric = is_exactly_symmetric(&kernel);
        Ok(SimilaritySpace {
            labels: self.labels.clone(),
            kernel,
            distances: Some(scaled),
            symmetric,
            psd_guaranteed: self.psd_guaranteed,
        })
    }

    /// Restriction to a strictly increasing list of point indices.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySpace);
        }
        for (k, &i) in indices.iter().enumerate() {
            if i >= self.n() {
                return Err(Error::InvalidSubset {
                    detail: format!("index {i} out of range for {} points", self.n()),
                });
            }
            if k > 0 && indices[k - 1] >= i {
                return Err(Error::InvalidSubset {
                    detail: "indices must be strictly increasing".into(),
                });
            }
        }
        let m = indices.len();
        let kernel = DMatrix::from_fn(m, m, |a, b| self.kernel[(indices[a], indices[b])]);
        let distances = self
            .distances
            .as_ref()
            .map(|d| DMatrix::from_fn(m, m, |a, b| d[(indices[a], indices[b])]));
        let labels = indices.iter().map(|&i| self.labels[i].clone()).collect();
        let symmetric = is_exactly_symmetric(&kernel);
        Ok(SimilaritySpace {
            labels,
            kernel,
            distances,
            symmetric,
            psd_guaranteed: self.psd_guaranteed,
        })
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.kernel.nrows()
    }

    /// Point labels, in index order.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Index of the point with the given label, if any.
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// The similarity kernel.
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// The stored (already scaled) distance matrix, when the space has one.
    pub fn distances(&self) -> Option<&DMatrix<f64>> {
        self.distances.as_ref()
    }

    /// Whether `kernel(i, j) == kernel(j, i)` exactly for all pairs.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Whether the space was built from distances (and can thus be scaled).
    pub fn is_metric_origin(&self) -> bool {
        self.distances.is_some()
    }

    /// Whether the kernel is positive semidefinite by construction (point
    /// clouds only); `false` merely means "not guaranteed".
    pub fn is_psd_guaranteed(&self) -> bool {
        self.psd_guaranteed
    }

    /// Smallest strictly positive stored distance, if the space has distances
    /// and any two points are at positive finite distance.
    pub fn min_positive_distance(&self) -> Option<f64> {
        let d = self.distances.as_ref()?;
        let mut best = f64::INFINITY;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                let v = d[(i, j)];
                if v > 0.0 && v < best {
                    best = v;
                }
            }
        }
        best.is_finite().then_some(best)
    }
}

fn validate_kernel(kernel: &DMatrix<f64>) -> Result<()> {
    if kernel.nrows() != kernel.ncols() {
        return Err(Error::NonSquare {
            rows: kernel.nrows(),
            cols: kernel.ncols(),
        });
    }
    if kernel.nrows() == 0 {
        return Err(Error::EmptySpace);
    }
    for i in 0..kernel.nrows() {
        for j in 0..kernel.ncols() {
            let v = kernel[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i,
                    col: j,
                    value: v,
                });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
        if kernel[(i, i)] <= 0.0 {
            return Err(Error::NonpositiveDiagonal {
                index: i,
                value: kernel[(i, i)],
            });
        }
    }
    Ok(())
}

fn check_labels(labels: Option<Vec<String>>, n: usize) -> Result<Vec<String>> {
    let labels = labels.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    let mut seen = std::collections::HashSet::new();
    for l in &labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::DuplicateLabel { label: l.clone() });
        }
    }
    Ok(labels)
}

fn is_exactly_symmetric(m: &DMatrix<f64>) -> bool {
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if m[(i, j)] != m[(j, i)] {
                return false;
            }
        }
    }
    true
}

/// A finite nonnegative measure on the index set of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    weights: Vec<f64>,
    total: f64,
}

impl Measure {
    /// Builds a measure from nonnegative finite weights.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptySpace);
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight { index: i, value: w });
            }
            if w < 0.0 {
                return Err(Error::NegativeWeight { index: i, value: w });
            }
        }
        let total = weights.iter().sum();
        Ok(Measure { weights, total })
    }

    /// The uniform probability measure on `n` points.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        Measure::new(vec![1.0 / n as f64; n])
    }

    /// The point mass at index `i` on `n` points.
    pub fn dirac(n: usize, i: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        if i >= n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: i,
            });
        }
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Measure::new(w)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Whether the total mass is 1 within [`PROBABILITY_TOL`].
    pub fn is_probability(&self) -> bool {
        (self.total - 1.0).abs() <= PROBABILITY_TOL
    }

    /// Errors with [`Error::NotProbability`] unless the total mass is 1
    /// within [`PROBABILITY_TOL`].
    pub fn require_probability(&self) -> Result<()> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(Error::NotProbability { total: self.total })
        }
    }

    /// Indices carrying strictly positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > 0.0)
            .collect()
    }

    /// The measure rescaled to total mass 1.
    pub fn normalized(&self) -> Result<Self> {
        if self.total <= 0.0 {
            return Err(Error::ZeroTotal);
        }
        Measure::new(self.weights.iter().map(|w| w / self.total).collect())
    }

    /// Total-variation distance: half the L1 distance between weight vectors.
    pub fn tv_distance(&self, other: &Measure) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0)
    }
}
