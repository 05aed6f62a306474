//! Similarity-sensitive diversity and entropy of probability measures.
//!
//! Given a space with kernel `K` and a probability measure `mu`, the
//! typicality of point `i` is `(K mu)_i = sum_j K(i, j) mu_j`: how much mass
//! sits near `i`, as seen through the kernel. The diversity of order `q` is
//! the power mean of order `1 - q` of the reciprocal typicalities:
//!
//! * `q` outside `{1, +-inf}`: `(sum_i mu_i (K mu)_i^(q-1))^(1/(1-q))`,
//! * `q = 1`: `exp(-sum_i mu_i ln (K mu)_i)`,
//! * `q = +inf`: `1 / max_{support} (K mu)_i`,
//! * `q = -inf`: `1 / min_{support} (K mu)_i`.
//!
//! Entropy is the natural log of diversity. With the identity kernel these are
//! the classical Hill numbers / Renyi entropies. Diversity is nonincreasing in
//! `q`; orders below zero are accepted (they reward rarity) and flagged in
//! profiles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::means::{power_mean_on_support, Order};
use crate::spaces::{Measure, SimilaritySpace};

/// Typicalities below this on the support indicate the kernel has decayed past
/// double precision; evaluation refuses rather than returning garbage.
pub const TYPICALITY_FLOOR: f64 = 1e-300;

/// The typicality vector `K mu`. `mu` may be any finite measure.
pub fn typicality(space: &SimilaritySpace, mu: &Measure) -> Result<Vec<f64>> {
    if mu.len() != space.n() {
        return Err(Error::SizeMismatch {
            expected: space.n(),
            got: mu.len(),
        });
    }
    let k = space.kernel();
    let n = space.n();
    let w = mu.weights();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += k[(i, j)] * w[j];
        }
        out[i] = acc;
    }
    Ok(out)
}

/// Validated reciprocal-typicality data for a probability measure.
struct Atypicality {
    support: Vec<usize>,
    kmu: Vec<f64>,
    inv: Vec<f64>,
}

fn atypicality(space: &SimilaritySpace, mu: &Measure) -> Result<Atypicality> {
    mu.require_probability()?;
    let kmu = typicality(space, mu)?;
    let support = mu.support();
    for &i in &support {
        if kmu[i] < TYPICALITY_FLOOR {
            return Err(Error::TypicalityUnderflow {
                index: i,
                value: kmu[i],
            });
        }
    }
    // Off-support entries are never read by the mean; keep them harmless.
    let inv = kmu
        .iter()
        .map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 })
        .collect();
    Ok(Atypicality { support, kmu, inv })
}

/// Diversity of order `q` of the probability measure `mu`.
pub fn diversity(space: &SimilaritySpace, mu: &Measure, q: Order) -> Result<f64> {
    let data = atypicality(space, mu)?;
    let order = Order::new(1.0 - q.value()).expect("1 - q is never NaN for a valid order");
    Ok(power_mean_on_support(
        mu.weights(),
        &data.inv,
        &data.support,
        order,
    ))
}

/// Entropy of order `q`: the natural logarithm of diversity.
pub fn entropy(space: &SimilaritySpace, mu: &Measure, q: Order) -> Result<f64> {
    Ok(diversity(space, mu, q)?.ln())
}

/// One row of a diversity profile.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileEntry {
    pub order: Order,
    pub diversity: f64,
    pub entropy: f64,
}

/// Diversity and entropy over a grid of orders.
#[derive(Debug, Clone, Serialize)]
pub struct DiversityProfile {
    pub entries: Vec<ProfileEntry>,
    /// Set when the grid contains orders below zero, which weight rare points
    /// more than common ones and can exceed the naive point count.
    pub has_negative_orders: bool,
}

/// Evaluates the diversity profile over `orders` and verifies that it is
/// nonincreasing in `q` (within relative slack 1e-9), as theory demands.
pub fn diversity_profile(
    space: &SimilaritySpace,
    mu: &Measure,
    orders: &[Order],
) -> Result<DiversityProfile> {
    if orders.is_empty() {
        return Err(Error::BadParameter {
            detail: "order grid is empty".into(),
        });
    }
    let data = atypicality(space, mu)?;
    let entries: Vec<ProfileEntry> = orders
        .iter()
        .map(|&q| {
            let order = Order::new(1.0 - q.value()).expect("1 - q is never NaN");
            let d = power_mean_on_support(mu.weights(), &data.inv, &data.support, order);
            ProfileEntry {
                order: q,
                diversity: d,
                entropy: d.ln(),
            }
        })
        .collect();

    // Check monotonicity along increasing q regardless of input ordering.
    let mut sorted: Vec<&ProfileEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| a.order.partial_cmp(&b.order).expect("orders are not NaN"));
    for pair in sorted.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi.diversity > lo.diversity * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::NotMonotone {
                detail: format!(
                    "diversity rose from {} at q = {} to {} at q = {}",
                    lo.diversity, lo.order, hi.diversity, hi.order
                ),
            });
        }
    }

    Ok(DiversityProfile {
        has_negative_orders: orders.iter().any(|q| q.value() < 0.0),
        entries,
    })
}

/// Report on whether typicality is constant across the support of a measure.
#[derive(Debug, Clone, Serialize)]
pub struct BalanceReport {
    /// Max relative deviation of support typicalities from their mean is
    /// within the tolerance.
    pub balanced: bool,
    /// Mean typicality over the support.
    pub value: f64,
    /// Max relative deviation of support typicalities from `value`.
    pub max_rel_deviation: f64,
    pub tolerance: f64,
}

/// Checks whether `K mu` is constant on the support of `mu` within a relative
/// tolerance. Balanced measures have constant diversity profiles equal to the
/// reciprocal of that constant.
pub fn is_balanced(space: &SimilaritySpace, mu: &Measure, tolerance: f64) -> Result<BalanceReport> {
    let data = atypicality(space, mu)?;
    let vals: Vec<f64> = data.support.iter().map(|&i| data.kmu[i]).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let max_rel_deviation = vals
        .iter()
        .map(|v| (v - mean).abs() / mean)
        .fold(0.0, f64::max);
    Ok(BalanceReport {
        balanced: max_rel_deviation <= tolerance,
        value: mean,
        max_rel_deviation,
        tolerance,
    })
}

/// Finds an order where the diversity profiles of two measures cross, by
/// bisection on `D_q(mu1) - D_q(mu2)` over the bracket `[lo, hi]`.
///
/// `hi` may be `+inf`; the sign there is taken from the order-infinity
/// diversities, and an interior sign change is then bracketed by doubling.
/// Errors with [`Error::NoSignChange`] when both ends have the same strict
/// sign. The bisection stops when the bracket is narrower than `xtol`.
pub fn crossing_order(
    space: &SimilaritySpace,
    mu1: &Measure,
    mu2: &Measure,
    lo: Order,
    hi: Order,
    xtol: f64,
) -> Result<Order> {
    if xtol.is_nan() || xtol <= 0.0 || lo.value() >= hi.value() || lo.value().is_infinite() {
        return Err(Error::BadParameter {
            detail: format!("bad bracket [{lo}, {hi}] or tolerance {xtol}"),
        });
    }
    let diff = |q: Order| -> Result<f64> {
        Ok(diversity(space, mu1, q)? - diversity(space, mu2, q)?)
    };
    let f_lo = diff(lo)?;
    let f_hi = diff(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 && hi.is_finite() {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange {
            lo: lo.value(),
            hi: hi.value(),
        });
    }

    // Need a finite right end for bisection; expand until the sign flips.
    let mut a = lo.value();
    let mut fa = f_lo;
    let mut b = if hi.is_finite() {
        hi.value()
    } else {
        let mut b = (2.0 * a.abs()).max(1.0);
        loop {
            let fb = diff(Order::new(b)?)?;
            if fb.signum() != fa.signum() || fb == 0.0 {
                break b;
            }
            b *= 2.0;
            if b > 1e12 {
                // The profiles only cross "at infinity"; report no crossing at
                // any representable order.
                return Err(Error::NoSignChange {
                    lo: lo.value(),
                    hi: hi.value(),
                });
            }
        }
    };

    while b - a > xtol {
        let mid = 0.5 * (a + b);
        let fm = diff(Order::new(mid)?)?;
        if fm == 0.0 {
            return Order::new(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Order::new(0.5 * (a + b))
}
