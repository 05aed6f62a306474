//! Exact maximum diversity by subset enumeration, and maximiser certificates.
//!
//! For a symmetric kernel, one probability measure maximises diversity of
//! every order `q in [0, inf]` simultaneously, and the maximum value equals
//! the largest magnitude over nonempty subsets that admit a nonnegative
//! weighting; the maximiser is that weighting, normalized. Enumerating all
//! `2^n - 1` subsets and testing feasibility is therefore exact. It is also
//! exponential, hence the size cap.
//!
//! [`verify_maximiser`] checks the four properties that certify a claimed
//! maximiser independently of how it was found: balance on its support,
//! order-independence of its diversity, global supertypicality (every point's
//! typicality at least the reciprocal value), and the presence of a
//! sufficiently similar support point for every point of the space.

use rayon::prelude::*;
use serde::Serialize;

use crate::diversity::{diversity, is_balanced, typicality, BalanceReport};
use crate::error::{Error, Result};
use crate::linalg;
use crate::magnitude::{feasibility_tolerance, normalize_weighting, positive_weighting_of};
use crate::means::Order;
use crate::spaces::{Measure, SimilaritySpace};

/// Largest point count accepted by subset enumeration by default.
pub const ENUMERATION_CAP: usize = 20;

/// Default relative tolerance for maximiser certificates.
pub const CERT_TOL: f64 = 1e-8;

/// How the maximum-diversity problem was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    /// Exhaustive subset enumeration (exact).
    Enumeration,
    /// Quadratic minimization over the simplex (certified by a duality gap,
    /// or local search when the kernel is not positive semidefinite).
    Convex,
}

impl std::fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverMethod::Enumeration => write!(f, "enumeration"),
            SolverMethod::Convex => write!(f, "convex"),
        }
    }
}

/// Iteration diagnostics from the numerical solver.
#[derive(Debug, Clone, Serialize)]
pub struct SolverTelemetry {
    pub iterations: usize,
    /// Final duality gap (stationarity measure for the local-search fallback).
    pub final_gap: f64,
    /// Sampled `(iteration, gap)` pairs, when tracing was requested.
    pub gap_trace: Vec<(usize, f64)>,
    /// Restarts used by the local-search fallback (zero for certified runs).
    pub restarts: usize,
    /// Whether a support re-solve supplied the final iterate.
    pub polished: bool,
}

/// One order's diversity compared against the claimed maximum.
#[derive(Debug, Clone, Serialize)]
pub struct OrderCheck {
    pub order: Order,
    pub diversity: f64,
    pub rel_deviation: f64,
}

/// Certificate report for a claimed maximising measure.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    /// (a) Typicality constant across the support.
    pub balance: BalanceReport,
    /// (b) Diversity equals the claimed value at orders 0, 1, 2, inf.
    pub order_checks: Vec<OrderCheck>,
    pub max_order_rel_deviation: f64,
    pub orders_pass: bool,
    /// (c) `min_i (K mu)_i - 1/value`; nonnegative (within tolerance) when the
    /// measure is maximising.
    pub supertypicality_margin: f64,
    pub supertypicality_pass: bool,
    /// (d) `min_i max_{j in supp} K(i, j) - 1/value`: every point has a
    /// support point at least `1/value` similar to it.
    pub nearest_support_margin: f64,
    pub nearest_support_pass: bool,
    /// Relative tolerance used by all four checks.
    pub tolerance: f64,
    pub pass: bool,
}

/// Result of a maximum-diversity computation.
#[derive(Debug, Clone, Serialize)]
pub struct MaxDivResult {
    /// The maximum diversity (common to all orders).
    pub value: f64,
    /// The maximising probability measure on the full index set.
    pub measure: Measure,
    /// Indices carrying positive mass.
    pub support: Vec<usize>,
    /// Balance of the maximiser on its support.
    pub balance: BalanceReport,
    /// `min_i (K mu)_i - 1/value` over all points of the space.
    pub supertypicality_margin: f64,
    pub method: SolverMethod,
    /// Full certificate report (checks a-d).
    pub certificates: VerifyReport,
    /// Condition estimate of the kernel restricted to the support.
    pub condition_estimate: Option<f64>,
    /// Condition estimate at or above the numerically-singular cutoff.
    pub ill_conditioned: bool,
    /// True when the kernel was not positive semidefinite and the value is
    /// only a local search result, not a certified global optimum.
    pub local_only: bool,
    pub telemetry: Option<SolverTelemetry>,
}

impl MaxDivResult {
    /// The maximum entropy: natural log of the value.
    pub fn entropy(&self) -> f64 {
        self.value.ln()
    }
}

// `Serialize` for `Measure` lives here rather than in `spaces` because wire
// formats are only produced from solver results; plain weight-vector output.
impl Serialize for Measure {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.weights().serialize(serializer)
    }
}

/// Candidate subset in the enumeration: compared by total, then smaller
/// cardinality, then lexicographic index order, so the parallel reduction is
/// a total order and the winner matches a sequential scan.
struct Candidate {
    total: f64,
    mask: u32,
    weights: Vec<f64>,
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    if a.total != b.total {
        return if a.total > b.total { a } else { b };
    }
    let (ca, cb) = (a.mask.count_ones(), b.mask.count_ones());
    if ca != cb {
        return if ca < cb { a } else { b };
    }
    if linalg::lex_smaller_mask(a.mask, b.mask) {
        a
    } else {
        b
    }
}

fn mask_indices(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Exact maximum diversity by enumeration of all nonempty subsets.
///
/// Every subset whose restricted kernel admits a nonnegative weighting is a
/// candidate with value equal to its magnitude; the best one wins. The
/// returned measure is the winner's normalized weighting, embedded in the
/// full space. `cap` defaults to [`ENUMERATION_CAP`].
pub fn max_diversity_exact(space: &SimilaritySpace, cap: Option<usize>) -> Result<MaxDivResult> {
    if !space.is_symmetric() {
        return Err(Error::AsymmetricKernel);
    }
    let n = space.n();
    let cap = cap.unwrap_or(ENUMERATION_CAP);
    if n > cap.min(31) {
        return Err(Error::TooLarge {
            size: n,
            cap: cap.min(31),
        });
    }

    let kernel = space.kernel();
    let total_masks: u32 = if n == 31 { u32::MAX } else { (1u32 << n) - 1 };
    let best = (1..=total_masks)
        .into_par_iter()
        .filter_map(|mask| {
            let indices = mask_indices(mask, n);
            let m = indices.len();
            let sub = nalgebra::DMatrix::from_fn(m, m, |a, b| kernel[(indices[a], indices[b])]);
            let w = positive_weighting_of(&sub, feasibility_tolerance(m))?;
            Some(Candidate {
                total: w.total(),
                mask,
                weights: w.weights().to_vec(),
            })
        })
        .reduce_with(better)
        .expect("singletons are always feasible");

    let indices = mask_indices(best.mask, n);
    let measure = normalize_weighting(&best.weights, &indices, n)?;
    finish_result(
        space,
        best.total,
        measure,
        SolverMethod::Enumeration,
        false,
        None,
        CERT_TOL,
    )
}

/// Assembles a [`MaxDivResult`] from a solved value and measure: certificates,
/// balance, margins, and the support condition estimate.
pub(crate) fn finish_result(
    space: &SimilaritySpace,
    value: f64,
    measure: Measure,
    method: SolverMethod,
    local_only: bool,
    telemetry: Option<SolverTelemetry>,
    cert_tol: f64,
) -> Result<MaxDivResult> {
    let certificates = verify_maximiser(space, &measure, value, cert_tol)?;
    let support = measure.support();
    let sub = nalgebra::DMatrix::from_fn(support.len(), support.len(), |a, b| {
        space.kernel()[(support[a], support[b])]
    });
    let condition = linalg::condition_estimate_symmetric(&sub);
    Ok(MaxDivResult {
        value,
        support,
        balance: certificates.balance.clone(),
        supertypicality_margin: certificates.supertypicality_margin,
        method,
        condition_estimate: Some(condition),
        ill_conditioned: condition >= crate::magnitude::CONDITION_CUTOFF,
        local_only,
        telemetry,
        certificates,
        measure,
    })
}

/// Certifies a claimed maximiser by checking, at relative tolerance `tol`:
///
/// (a) typicality is constant on the support (balance);
/// (b) diversity at orders `{0, 1, 2, inf}` equals `value`;
/// (c) every point's typicality is at least `1/value`;
/// (d) every point has a support point with similarity at least `1/value`.
pub fn verify_maximiser(
    space: &SimilaritySpace,
    mu: &Measure,
    value: f64,
    tol: f64,
) -> Result<VerifyReport> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::BadParameter {
            detail: format!("claimed value {value} must be positive and finite"),
        });
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::BadParameter {
            detail: format!("certificate tolerance {tol} must be nonnegative"),
        });
    }
    mu.require_probability()?;

    let balance = is_balanced(space, mu, tol)?;

    let orders = [Order::ZERO, Order::ONE, Order::TWO, Order::INFINITY];
    let mut order_checks = Vec::with_capacity(orders.len());
    let mut max_dev = 0.0f64;
    for q in orders {
        let d = diversity(space, mu, q)?;
        let rel = (d - value).abs() / value;
        max_dev = max_dev.max(rel);
        order_checks.push(OrderCheck {
            order: q,
            diversity: d,
            rel_deviation: rel,
        });
    }
    let orders_pass = max_dev <= tol;

    let bound = 1.0 / value;
    let kmu = typicality(space, mu)?;
    let min_typ = kmu.iter().cloned().fold(f64::MAX, f64::min);
    let supertypicality_margin = min_typ - bound;
    let supertypicality_pass = min_typ >= bound * (1.0 - tol);

    let support = mu.support();
    let mut min_nearest = f64::MAX;
    for i in 0..space.n() {
        let nearest = support
            .iter()
            .map(|&j| space.kernel()[(i, j)])
            .fold(f64::MIN, f64::max);
        min_nearest = min_nearest.min(nearest);
    }
    let nearest_support_margin = min_nearest - bound;
    let nearest_support_pass = min_nearest >= bound * (1.0 - tol);

    let pass = balance.balanced && orders_pass && supertypicality_pass && nearest_support_pass;
    Ok(VerifyReport {
        balance,
        order_checks,
        max_order_rel_deviation: max_dev,
        orders_pass,
        supertypicality_margin,
        supertypicality_pass,
        nearest_support_margin,
        nearest_support_pass,
        tolerance: tol,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Metric;
    use nalgebra::DMatrix;

    fn identity_space(n: usize) -> SimilaritySpace {
        SimilaritySpace::from_kernel(DMatrix::identity(n, n), None).unwrap()
    }

    fn chain_space() -> SimilaritySpace {
        SimilaritySpace::from_kernel_rows(&[
            vec![1.0, 1.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap()
    }

    fn two_point_space(d: f64) -> SimilaritySpace {
        let dist = DMatrix::from_row_slice(2, 2, &[0.0, d, d, 0.0]);
        SimilaritySpace::from_distances(dist, 1.0, None).unwrap()
    }

    #[test]
    fn identity_maximum_is_uniform() {
        let s = identity_space(3);
        let r = max_diversity_exact(&s, None).unwrap();
        assert!((r.value - 3.0).abs() < 1e-12);
        assert_eq!(r.support, vec![0, 1, 2]);
        for &w in r.measure.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(r.certificates.pass);
        assert_eq!(r.method, SolverMethod::Enumeration);
        assert!(!r.local_only);
        assert!((r.entropy() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_point_value_one() {
        let s = identity_space(1);
        let r = max_diversity_exact(&s, None).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.entropy(), 0.0);
        assert_eq!(r.measure.weights(), &[1.0]);
    }

    #[test]
    fn two_point_closed_form() {
        let d = 1.0f64;
        let s = two_point_space(d);
        let r = max_diversity_exact(&s, None).unwrap();
        let expect = 2.0 / (1.0 + (-d).exp());
        assert!((r.value - expect).abs() < 1e-12, "{} vs {expect}", r.value);
        assert!((r.measure.weights()[0] - 0.5).abs() < 1e-12);
        assert!(r.certificates.pass);
    }

    #[test]
    fn chain_maximum_sits_on_the_ends() {
        let s = chain_space();
        let r = max_diversity_exact(&s, None).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert_eq!(r.support, vec![0, 2]);
        assert!((r.measure.weights()[0] - 0.5).abs() < 1e-12);
        assert_eq!(r.measure.weights()[1], 0.0);
        // The midpoint has typicality exactly 1/2 = 1/value: margin zero.
        assert!(r.supertypicality_margin.abs() < 1e-12);
        assert!(r.certificates.pass);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let s = identity_space(8);
        assert!(matches!(
            max_diversity_exact(&s, Some(6)),
            Err(Error::TooLarge { size: 8, cap: 6 })
        ));
    }

    #[test]
    fn asymmetric_kernels_are_rejected() {
        let s = SimilaritySpace::from_kernel_rows(&[vec![1.0, 0.2], vec![0.3, 1.0]]).unwrap();
        assert!(matches!(
            max_diversity_exact(&s, None),
            Err(Error::AsymmetricKernel)
        ));
    }

    #[test]
    fn verify_passes_for_enumerated_maximiser() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![0.2, 2.0], vec![1.5, 1.5]];
        let s = SimilaritySpace::from_points(&pts, Metric::Euclidean, 1.0, None).unwrap();
        let r = max_diversity_exact(&s, None).unwrap();
        let report = verify_maximiser(&s, &r.measure, r.value, CERT_TOL).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.balance.balanced);
        assert!(report.orders_pass);
        assert!(report.supertypicality_pass);
        assert!(report.nearest_support_pass);
    }

    #[test]
    fn verify_rejects_non_maximisers() {
        let s = chain_space();
        // Uniform on the chain is not balanced: the middle sees everyone.
        let u = Measure::uniform(3).unwrap();
        let report = verify_maximiser(&s, &u, 2.0, CERT_TOL).unwrap();
        assert!(!report.pass);
        assert!(!report.balance.balanced);

        // A point mass on a two-point space is balanced but not maximising:
        // its diversity is 1, not the claimed 2-ish value, and the far point
        // violates supertypicality.
        let s2 = two_point_space(3.0);
        let delta = Measure::dirac(2, 0).unwrap();
        let value = 2.0 / (1.0 + (-3.0f64).exp());
        let report = verify_maximiser(&s2, &delta, value, CERT_TOL).unwrap();
        assert!(!report.pass);
        assert!(!report.orders_pass);
        assert!(!report.supertypicality_pass);
        assert!(!report.nearest_support_pass);
    }

    #[test]
    fn verify_validates_inputs() {
        let s = identity_space(2);
        let u = Measure::uniform(2).unwrap();
        assert!(verify_maximiser(&s, &u, -1.0, CERT_TOL).is_err());
        assert!(verify_maximiser(&s, &u, f64::INFINITY, CERT_TOL).is_err());
        assert!(verify_maximiser(&s, &u, 2.0, -0.5).is_err());
        let not_prob = Measure::new(vec![0.7, 0.7]).unwrap();
        assert!(matches!(
            verify_maximiser(&s, &not_prob, 2.0, CERT_TOL),
            Err(Error::NotProbability { .. })
        ));
    }

    #[test]
    fn deletion_monotonicity_on_small_spaces() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.7, 0.1],
            vec![0.4, 1.1],
            vec![2.0, 0.3],
            vec![1.2, 1.7],
        ];
        let s = SimilaritySpace::from_points(&pts, Metric::Euclidean, 1.0, None).unwrap();
        let full = max_diversity_exact(&s, None).unwrap().value;
        // Removing any point cannot increase the maximum diversity.
        for drop in 0..5 {
            let keep: Vec<usize> = (0..5).filter(|&i| i != drop).collect();
            let sub = s.restrict(&keep).unwrap();
            let v = max_diversity_exact(&sub, None).unwrap().value;
            assert!(v <= full + 1e-10, "dropping {drop}: {v} > {full}");
        }
    }

    #[test]
    fn kernel_dominance_monotonicity() {
        // Entrywise-larger kernels (more overlap) cannot be more diverse.
        let base = [
            [1.0, 0.5, 0.2],
            [0.5, 1.0, 0.4],
            [0.2, 0.4, 1.0],
        ];
        let damp = |f: f64| {
            SimilaritySpace::from_kernel_rows(&[
                vec![1.0, base[0][1] * f, base[0][2] * f],
                vec![base[1][0] * f, 1.0, base[1][2] * f],
                vec![base[2][0] * f, base[2][1] * f, 1.0],
            ])
            .unwrap()
        };
        let bigger = max_diversity_exact(&damp(1.0), None).unwrap().value;
        let smaller = max_diversity_exact(&damp(0.5), None).unwrap().value;
        assert!(bigger <= smaller + 1e-10, "{bigger} vs {smaller}");
    }

    #[test]
    fn value_between_one_and_point_count() {
        let pts = vec![vec![0.0], vec![0.2], vec![0.9], vec![1.4]];
        let s = SimilaritySpace::from_points(&pts, Metric::Euclidean, 1.0, None).unwrap();
        let r = max_diversity_exact(&s, None).unwrap();
        assert!(r.value >= 1.0 - 1e-12);
        assert!(r.value <= 4.0 + 1e-12);
    }

    #[test]
    fn tie_break_prefers_smaller_lexicographic_supports() {
        // Two identical copies of the same two far-apart points: several
        // subsets attain the maximum; the lexicographically first must win.
        let s = SimilaritySpace::from_kernel_rows(&[
            vec![1.0, 1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0],
        ])
        .unwrap();
        let r = max_diversity_exact(&s, None).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert_eq!(r.support, vec![0, 2]);
    }
}
