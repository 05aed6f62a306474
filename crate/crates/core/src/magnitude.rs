//! Weight vectors and magnitude of symmetric similarity kernels.
//!
//! A weighting `w` solves `K w = 1` (all ones). Its total `sum_i w_i` is the
//! magnitude of the space; for symmetric kernels the total is the same for
//! every weighting, so magnitude is well defined even when `K` is singular,
//! as long as the system is consistent. A *positive* weighting (all entries
//! nonnegative) normalizes to a balanced probability measure, which is what
//! the maximum-diversity solvers enumerate.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::spaces::{Measure, SimilaritySpace};

/// Condition estimates at or above this treat the kernel as numerically
/// singular, routing the solve through the minimum-norm path.
pub const CONDITION_CUTOFF: f64 = 1e12;

/// Weight entries in `[-NEGATIVE_CLAMP, 0)` are rounding debris and are
/// clamped to zero before the positivity flag is computed.
pub const NEGATIVE_CLAMP: f64 = 1e-12;

/// Default max-norm residual tolerance for feasibility decisions, per point.
pub const FEASIBILITY_TOL_PER_POINT: f64 = 1e-9;

/// A solution of `K w = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct Weighting {
    weights: Vec<f64>,
    /// Max-norm residual of `K w - 1`.
    residual: f64,
    /// All weights nonnegative (after clamping entries above
    /// [`NEGATIVE_CLAMP`] in magnitude of rounding noise).
    positive: bool,
}

impl Weighting {
    fn from_raw(mut weights: Vec<f64>, residual: f64) -> Self {
        for w in &mut weights {
            if *w < 0.0 && *w >= -NEGATIVE_CLAMP {
                *w = 0.0;
            }
        }
        let positive = weights.iter().all(|&w| w >= 0.0);
        Weighting {
            weights,
            residual,
            positive,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The magnitude contribution: sum of all weights.
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Max-norm residual of `K w - 1` for the stored weights.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Whether every weight is nonnegative.
    pub fn is_positive(&self) -> bool {
        self.positive
    }
}

/// Outcome of solving `K w = 1` exactly.
#[derive(Debug, Clone)]
pub enum WeightVector {
    /// The kernel is numerically nonsingular; the weighting is unique.
    Unique(Weighting),
    /// The kernel is numerically singular but the system is consistent; the
    /// minimum-norm solution is returned. Every solution has the same total,
    /// so magnitude is still well defined.
    MinimumNorm(Weighting),
}

impl WeightVector {
    pub fn weighting(&self) -> &Weighting {
        match self {
            WeightVector::Unique(w) | WeightVector::MinimumNorm(w) => w,
        }
    }

    pub fn is_unique(&self) -> bool {
        matches!(self, WeightVector::Unique(_))
    }
}

fn require_symmetric(space: &SimilaritySpace) -> Result<()> {
    if space.is_symmetric() {
        Ok(())
    } else {
        Err(Error::AsymmetricKernel)
    }
}

/// Default feasibility tolerance for an `n`-point kernel.
pub fn feasibility_tolerance(n: usize) -> f64 {
    FEASIBILITY_TOL_PER_POINT * n as f64
}

/// Solves `K w = 1` for a symmetric kernel.
///
/// Nonsingular kernels (condition estimate below [`CONDITION_CUTOFF`]) give
/// [`WeightVector::Unique`]. Numerically singular kernels fall back to the
/// minimum-norm solution when the system is consistent and error with
/// [`Error::Inconsistent`] otherwise.
pub fn weight_vector(space: &SimilaritySpace) -> Result<WeightVector> {
    require_symmetric(space)?;
    if let Some(unique) = unique_weighting_of(space.kernel()) {
        return Ok(WeightVector::Unique(unique));
    }
    let ones = DVector::from_element(space.n(), 1.0);
    let (x, resid) = linalg::min_norm_symmetric(space.kernel(), &ones, 1e-13);
    if resid <= feasibility_tolerance(space.n()) {
        Ok(WeightVector::MinimumNorm(Weighting::from_raw(
            x.iter().copied().collect(),
            resid,
        )))
    } else {
        Err(Error::Inconsistent { residual: resid })
    }
}

/// Unique-weighting solve at the matrix level: `None` when the kernel is
/// numerically singular (exact singular pivot or condition estimate at or
/// above the cutoff).
fn unique_weighting_of(kernel: &DMatrix<f64>) -> Option<Weighting> {
    let n = kernel.nrows();
    let ones = DVector::from_element(n, 1.0);
    let (x, resid) = linalg::solve_refined(kernel, &ones)?;
    let cond = linalg::condition_estimate_symmetric(kernel);
    if cond >= CONDITION_CUTOFF {
        return None;
    }
    Some(Weighting::from_raw(x.iter().copied().collect(), resid))
}

/// The magnitude of a symmetric space: the total of any weighting.
pub fn magnitude(space: &SimilaritySpace) -> Result<f64> {
    Ok(weight_vector(space)?.weighting().total())
}

/// Searches for a nonnegative weighting: a `w >= 0` with `K w = 1` within the
/// residual tolerance (default [`feasibility_tolerance`]).
///
/// When the kernel is nonsingular its unique weighting decides directly;
/// otherwise nonnegative least squares decides feasibility. Returns `None`
/// when no nonnegative weighting exists.
pub fn positive_weighting(
    space: &SimilaritySpace,
    tolerance: Option<f64>,
) -> Result<Option<Weighting>> {
    require_symmetric(space)?;
    let tol = tolerance.unwrap_or_else(|| feasibility_tolerance(space.n()));
    Ok(positive_weighting_of(space.kernel(), tol))
}

/// Matrix-level positive-weighting search used by the subset enumerator.
pub(crate) fn positive_weighting_of(kernel: &DMatrix<f64>, tolerance: f64) -> Option<Weighting> {
    let n = kernel.nrows();
    let ones = DVector::from_element(n, 1.0);
    // Fast path: a nonsingular kernel has exactly one weighting, so its sign
    // pattern decides feasibility outright when it is clearly nonnegative.
    if let Some((x, resid)) = linalg::solve_refined(kernel, &ones) {
        if resid <= tolerance {
            let w = Weighting::from_raw(x.iter().copied().collect(), resid);
            if w.is_positive() {
                return Some(w);
            }
            // Negative entries: defer to NNLS, which also copes with the
            // near-singular kernels where the LU sign pattern is untrustworthy.
        }
    }
    let (x, resid) = linalg::nnls(kernel, &ones);
    if resid <= tolerance {
        Some(Weighting::from_raw(x.iter().copied().collect(), resid))
    } else {
        None
    }
}

/// LU-only variant of [`positive_weighting_of`]: decides via the unique
/// weighting and never falls back to NNLS. Iterative polish steps use this;
/// an NNLS solve on a support of thousands of points costs more than the
/// whole surrounding solver, while the LU answer is either good or skippable.
pub(crate) fn positive_weighting_lu(kernel: &DMatrix<f64>, tolerance: f64) -> Option<Weighting> {
    let ones = DVector::from_element(kernel.nrows(), 1.0);
    let (x, resid) = linalg::solve_refined(kernel, &ones)?;
    if resid <= tolerance {
        let w = Weighting::from_raw(x.iter().copied().collect(), resid);
        if w.is_positive() {
            return Some(w);
        }
    }
    None
}

/// Normalizes a nonnegative weighting on the subset `support` of an
/// `ambient_n`-point space into a probability measure on the whole space.
pub fn normalize_weighting(
    weights: &[f64],
    support: &[usize],
    ambient_n: usize,
) -> Result<Measure> {
    if weights.len() != support.len() {
        return Err(Error::SizeMismatch {
            expected: support.len(),
            got: weights.len(),
        });
    }
    for (k, &i) in support.iter().enumerate() {
        if i >= ambient_n {
            return Err(Error::InvalidSubset {
                detail: format!("index {i} out of range for {ambient_n} points"),
            });
        }
        if k > 0 && support[k - 1] >= i {
            return Err(Error::InvalidSubset {
                detail: "support indices must be strictly increasing".into(),
            });
        }
    }
    let mut full = vec![0.0; ambient_n];
    for (k, &i) in support.iter().enumerate() {
        let w = weights[k];
        if !w.is_finite() {
            return Err(Error::NonFiniteWeight { index: i, value: w });
        }
        let w = if (-NEGATIVE_CLAMP..0.0).contains(&w) {
            0.0
        } else {
            w
        };
        if w < 0.0 {
            return Err(Error::NegativeWeight { index: i, value: w });
        }
        full[i] = w;
    }
    Measure::new(full)?.normalized()
}

/// 2-norm condition estimate of the kernel (symmetric spaces only).
pub fn kernel_condition(space: &SimilaritySpace) -> Result<f64> {
    require_symmetric(space)?;
    Ok(linalg::condition_estimate_symmetric(space.kernel()))
}
