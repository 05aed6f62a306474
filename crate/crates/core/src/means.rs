//! Power means of positive functions against probability measures.
//!
//! For a probability measure `mu` and values `f` that are strictly positive on
//! the support of `mu`, the power mean of order `t` is
//!
//! * `(sum_i mu_i f_i^t)^(1/t)` for finite nonzero `t`,
//! * the geometric mean `exp(sum_i mu_i ln f_i)` at `t = 0`,
//! * the maximum (resp. minimum) of `f` over the support at `t = +inf`
//!   (resp. `-inf`).
//!
//! Entries of `f` outside the support of `mu` are ignored entirely, so they
//! may hold arbitrary garbage. Evaluation is done in shifted log space: terms
//! are divided by the support maximum (for `t > 0`) or minimum (for `t < 0`)
//! before exponentiation, which keeps every summand in `(0, 1]` and avoids
//! overflow at extreme orders.

use crate::error::{Error, Result};
use crate::spaces::Measure;

/// Orders with magnitude at or above this are evaluated as `+inf`/`-inf`.
pub const ORDER_CLAMP: f64 = 1e6;

/// Orders with magnitude below this are evaluated as order zero; the
/// difference is far below double-precision evaluation noise.
const ORDER_ZERO_EPS: f64 = 1e-12;

/// An extended-real exponent. Never NaN; `+inf` and `-inf` are allowed.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Order(f64);

impl Order {
    pub const ZERO: Order = Order(0.0);
    pub const ONE: Order = Order(1.0);
    pub const TWO: Order = Order(2.0);
    pub const INFINITY: Order = Order(f64::INFINITY);
    pub const NEG_INFINITY: Order = Order(f64::NEG_INFINITY);

    /// Wraps a value, rejecting NaN.
    pub fn new(value: f64) -> Result<Order> {
        if value.is_nan() {
            return Err(Error::InvalidOrder);
        }
        Ok(Order(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 == f64::INFINITY {
            write!(f, "inf")
        } else if self.0 == f64::NEG_INFINITY {
            write!(f, "-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl serde::Serialize for Order {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            serializer.serialize_f64(self.0)
        } else if self.0 > 0.0 {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_str("-inf")
        }
    }
}

impl<'de> serde::Deserialize<'de> for Order {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Order, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Order;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                write!(f, "a number or \"inf\"/\"-inf\"")
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> core::result::Result<Order, E> {
                Order::new(v).map_err(E::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> core::result::Result<Order, E> {
                self.visit_f64(v as f64)
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> core::result::Result<Order, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> core::result::Result<Order, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

impl std::str::FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Order> {
        let t = s.trim();
        match t {
            "inf" | "+inf" => return Ok(Order::INFINITY),
            "-inf" => return Ok(Order::NEG_INFINITY),
            _ => {}
        }
        let v: f64 = t.parse().map_err(|_| Error::InvalidOrder)?;
        Order::new(v)
    }
}

/// Validates inputs and returns the support of `mu` with positivity of `f`
/// checked on it.
fn checked_support(mu: &Measure, values: &[f64]) -> Result<Vec<usize>> {
    mu.require_probability()?;
    if values.len() != mu.len() {
        return Err(Error::SizeMismatch {
            expected: mu.len(),
            got: values.len(),
        });
    }
    let support = mu.support();
    for &i in &support {
        let v = values[i];
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonpositiveValueOnSupport { index: i, value: v });
        }
    }
    Ok(support)
}

/// The power mean of `values` of order `t` against the probability measure `mu`.
pub fn power_mean(mu: &Measure, values: &[f64], t: Order) -> Result<f64> {
    let support = checked_support(mu, values)?;
    Ok(power_mean_on_support(mu.weights(), values, &support, t))
}

/// Power means over a grid of orders, validating the inputs once.
pub fn mean_profile(mu: &Measure, values: &[f64], orders: &[Order]) -> Result<Vec<f64>> {
    let support = checked_support(mu, values)?;
    Ok(orders
        .iter()
        .map(|&t| power_mean_on_support(mu.weights(), values, &support, t))
        .collect())
}

/// Core evaluation; `support` must be the support of `mu` and `values` must be
/// strictly positive and finite there.
pub(crate) fn power_mean_on_support(
    weights: &[f64],
    values: &[f64],
    support: &[usize],
    t: Order,
) -> f64 {
    debug_assert!(!support.is_empty());
    let t = t.value();

    if t >= ORDER_CLAMP {
        return support.iter().map(|&i| values[i]).fold(f64::MIN, f64::max);
    }
    if t <= -ORDER_CLAMP {
        return support.iter().map(|&i| values[i]).fold(f64::MAX, f64::min);
    }
    if t.abs() < ORDER_ZERO_EPS {
        // Geometric mean.
        let log_sum: f64 = support.iter().map(|&i| weights[i] * values[i].ln()).sum();
        return log_sum.exp();
    }
    if t == 1.0 {
        // Arithmetic mean, taken directly: it cannot overflow (the weights
        // are a probability), and skipping the rescaled exp/ln evaluation
        // keeps clean cases bit-exact (e.g. richness at the delta kernel).
        return support.iter().map(|&i| weights[i] * values[i]).sum();
    }

    // Shift by the extreme value so that every ratio^t lies in (0, 1]; the
    // term at the extremum contributes its full weight, so the sum never
    // underflows to zero.
    let shift = if t > 0.0 {
        support.iter().map(|&i| values[i]).fold(f64::MIN, f64::max)
    } else {
        support.iter().map(|&i| values[i]).fold(f64::MAX, f64::min)
    };
    let sum: f64 = support
        .iter()
        .map(|&i| weights[i] * (t * (values[i] / shift).ln()).exp())
        .sum();
    shift * (sum.ln() / t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mean(weights: &[f64], values: &[f64], t: f64) -> f64 {
        power_mean(
            &Measure::new(weights.to_vec()).unwrap(),
            values,
            Order::new(t).unwrap(),
        )
        .unwrap()
    }

    /// Direct textbook evaluation, no shifting. Valid while `f^t` stays in
    /// range; used as the independent check at moderate orders.
    fn naive_mean(weights: &[f64], values: &[f64], t: f64) -> f64 {
        let sum: f64 = weights
            .iter()
            .zip(values)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, v)| w * v.powf(t))
            .sum();
        sum.powf(1.0 / t)
    }

    #[test]
    fn classic_orders() {
        let w = [0.5, 0.5];
        // Geometric mean of 1 and 4 is 2.
        assert!((mean(&w, &[1.0, 4.0], 0.0) - 2.0).abs() < 1e-15);
        // Arithmetic mean.
        assert!((mean(&w, &[1.0, 4.0], 1.0) - 2.5).abs() < 1e-15);
        // Harmonic mean: 2 / (1 + 1/4) = 1.6.
        assert!((mean(&w, &[1.0, 4.0], -1.0) - 1.6).abs() < 1e-15);
        // Quadratic mean: sqrt((1 + 16)/2).
        assert!((mean(&w, &[1.0, 4.0], 2.0) - (8.5f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn extreme_orders_ignore_unsupported_entries() {
        let w = [0.3, 0.7, 0.0];
        let f = [2.0, 5.0, 999.0];
        assert_eq!(mean(&w, &f, f64::INFINITY), 5.0);
        assert_eq!(mean(&w, &f, f64::NEG_INFINITY), 2.0);
        // Orders at the clamp behave as infinite ones.
        assert_eq!(mean(&w, &f, 1e6), 5.0);
        assert_eq!(mean(&w, &f, -1e6), 2.0);
    }

    #[test]
    fn garbage_off_support_is_ignored_everywhere() {
        let w = [0.5, 0.5, 0.0];
        let f = [1.0, 4.0, f64::NAN];
        assert!((mean(&w, &f, 0.0) - 2.0).abs() < 1e-15);
        assert!((mean(&w, &f, 1.0) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn sentinel_grid() {
        let w = [0.5, 0.5];
        let f = [1.0, 4.0];
        let mu = Measure::new(w.to_vec()).unwrap();
        let orders = [
            Order::NEG_INFINITY,
            Order::ZERO,
            Order::ONE,
            Order::INFINITY,
        ];
        let out = mean_profile(&mu, &f, &orders).unwrap();
        let expect = [1.0, 2.0, 2.5, 4.0];
        for (o, e) in out.iter().zip(expect) {
            assert!((o - e).abs() < 1e-15, "{o} vs {e}");
        }
    }

    #[test]
    fn constant_values_give_constant_mean() {
        let w = [0.2, 0.5, 0.3];
        let f = [3.0, 3.0, 3.0];
        for t in [-1e7, -3.0, -0.5, 0.0, 0.5, 1.0, 2.0, 100.0, 1e7] {
            assert!((mean(&w, &f, t) - 3.0).abs() < 1e-12, "order {t}");
        }
    }

    #[test]
    fn matches_naive_evaluation_at_moderate_orders() {
        let w = [0.1, 0.2, 0.3, 0.15, 0.15, 0.1];
        let f = [0.5, 1.0, 2.0, 3.5, 0.8, 1.7];
        for k in 0..=50 {
            let t = -5.0 + 10.0 * k as f64 / 50.0;
            if t.abs() < 1e-9 {
                continue;
            }
            let a = mean(&w, &f, t);
            let b = naive_mean(&w, &f, t);
            assert!((a - b).abs() <= 1e-12 * b, "order {t}: {a} vs {b}");
        }
    }

    #[test]
    fn profile_nondecreasing_in_order() {
        let w = [0.1, 0.2, 0.3, 0.15, 0.15, 0.1];
        let f = [0.5, 1.0, 2.0, 3.5, 0.8, 1.7];
        let mut prev = f64::MIN;
        for k in 0..=50 {
            let t = -12.0 + 24.0 * k as f64 / 50.0;
            let m = mean(&w, &f, t);
            assert!(m >= prev - 1e-12 * m.abs(), "order {t}: {m} < {prev}");
            prev = m;
        }
    }

    #[test]
    fn no_overflow_at_large_orders_and_wide_ranges() {
        let w = [0.5, 0.5];
        let f = [1e-30, 1e30];
        // Naive evaluation would overflow 1e30^500; the shifted form does not.
        let hi = mean(&w, &f, 500.0);
        assert!(hi.is_finite() && hi > 1e29);
        let lo = mean(&w, &f, -500.0);
        assert!(lo.is_finite() && lo < 1e-29 && lo > 0.0);
    }

    #[test]
    fn continuity_at_zero() {
        let w = [0.25, 0.25, 0.25, 0.25];
        let f = [0.5, 1.5, 2.5, 4.0];
        let at_zero = mean(&w, &f, 0.0);
        for t in [1e-6, -1e-6, 1e-4, -1e-4, 1e-3] {
            let m = mean(&w, &f, t);
            assert!(
                (m - at_zero).abs() <= 1e-3 * t.abs().max(1e-6) / 1e-6,
                "order {t}: {m} vs {at_zero}"
            );
        }
        // Tight check right at the refinement floor.
        assert!((mean(&w, &f, 1e-6) - at_zero).abs() < 1e-6);
        assert!((mean(&w, &f, -1e-6) - at_zero).abs() < 1e-6);
    }

    #[test]
    fn validation_errors() {
        let mu = Measure::new(vec![0.6, 0.6]).unwrap();
        assert!(matches!(
            power_mean(&mu, &[1.0, 2.0], Order::ONE),
            Err(Error::NotProbability { .. })
        ));

        let mu = Measure::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            power_mean(&mu, &[1.0], Order::ONE),
            Err(Error::SizeMismatch { .. })
        ));
        assert!(matches!(
            power_mean(&mu, &[1.0, 0.0], Order::ONE),
            Err(Error::NonpositiveValueOnSupport { index: 1, .. })
        ));
        assert!(matches!(
            power_mean(&mu, &[1.0, f64::INFINITY], Order::ONE),
            Err(Error::NonpositiveValueOnSupport { .. })
        ));
        assert!(Order::new(f64::NAN).is_err());
    }

    #[test]
    fn order_parsing_and_display() {
        assert_eq!("inf".parse::<Order>().unwrap(), Order::INFINITY);
        assert_eq!("-inf".parse::<Order>().unwrap(), Order::NEG_INFINITY);
        assert_eq!("0.25".parse::<Order>().unwrap().value(), 0.25);
        assert!("nan".parse::<Order>().is_err());
        assert_eq!(Order::INFINITY.to_string(), "inf");
        assert_eq!(Order::new(2.0).unwrap().to_string(), "2");
    }

    // --- property tests ---

    /// Strictly positive weights summing to one, paired with positive values.
    fn simplex_and_values(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            proptest::collection::vec(1e-3..1.0f64, n),
            proptest::collection::vec(1e-3..1e3f64, n),
        )
            .prop_map(|(raw, vals)| {
                let s: f64 = raw.iter().sum();
                (raw.into_iter().map(|w| w / s).collect(), vals)
            })
    }

    proptest! {
        /// M_{-t}(mu, f) * M_t(mu, 1/f) == 1.
        #[test]
        fn duality((w, f) in simplex_and_values(5), t in -40.0..40.0f64) {
            let mu = Measure::new(w).unwrap();
            let inv: Vec<f64> = f.iter().map(|v| 1.0 / v).collect();
            let a = power_mean(&mu, &f, Order::new(-t).unwrap()).unwrap();
            let b = power_mean(&mu, &inv, Order::new(t).unwrap()).unwrap();
            prop_assert!((a * b - 1.0).abs() <= 1e-12);
        }

        /// Strict monotonicity in the order for non-constant values.
        #[test]
        fn strict_monotonicity((w, mut f) in simplex_and_values(5), lo in -20.0..19.0f64, gap in 0.5..10.0f64) {
            // Force the values to be genuinely non-constant.
            f[0] = 0.25;
            f[1] = 4.0;
            let mu = Measure::new(w).unwrap();
            let hi = lo + gap;
            let a = power_mean(&mu, &f, Order::new(lo).unwrap()).unwrap();
            let b = power_mean(&mu, &f, Order::new(hi).unwrap()).unwrap();
            prop_assert!(a < b, "M_{{{lo}}} = {a} !< M_{{{hi}}} = {b}");
        }

        /// The mean lies between the support min and max.
        #[test]
        fn between_min_and_max((w, f) in simplex_and_values(6), t in -30.0..30.0f64) {
            let mu = Measure::new(w).unwrap();
            let m = power_mean(&mu, &f, Order::new(t).unwrap()).unwrap();
            let lo = f.iter().cloned().fold(f64::MAX, f64::min);
            let hi = f.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert!(m >= lo * (1.0 - 1e-12) && m <= hi * (1.0 + 1e-12));
        }
    }
}
