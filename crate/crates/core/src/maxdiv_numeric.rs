//! Numerical maximum diversity via quadratic minimization on the simplex.
//!
//! For a symmetric kernel the maximum diversity equals the reciprocal of the
//! global minimum of `x' K x` over the probability simplex, and a minimiser
//! of the quadratic is a maximising measure. When the kernel is positive
//! semidefinite the problem is convex and is solved by Frank-Wolfe with away
//! steps and exact line search; the duality gap certifies the result. When it
//! is not, the same quantity is sought by multi-start projected gradient
//! descent, and the result is flagged as a local search outcome
//! (`local_only`) because only stationarity, not global optimality, can be
//! certified.
//!
//! Both paths share a support-polish accelerator: at geometric iteration
//! milestones (and on convergence) the weighting equation is solved exactly
//! on the current support, and the iterate jumps to the normalized weighting
//! whenever that is feasible and does not increase the objective. Once the
//! optimal support has been identified this lands on the exact solution in
//! one step.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::Serialize;

use crate::diversity::diversity;
use crate::error::{Error, Result};
use crate::linalg;
use crate::magnitude::{feasibility_tolerance, normalize_weighting, positive_weighting_lu};
use crate::maxdiv_exact::{finish_result, MaxDivResult, SolverMethod, SolverTelemetry};
use crate::means::Order;
use crate::spaces::{Measure, SimilaritySpace};

/// Step-size policy for the convex path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Exact minimization of the quadratic along the chosen direction,
    /// with away steps. Default; converges linearly on definite kernels.
    LineSearch,
    /// Classic `2/(k+2)` schedule, toward-vertex steps only. Slower; kept for
    /// comparison runs. The support polish still applies.
    Fixed,
}

/// Tuning knobs for [`max_diversity_numeric`].
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Iteration budget (shared across restarts on the local-search path).
    pub max_iters: usize,
    /// Stop when the duality gap of the quadratic falls to this value.
    pub tolerance: f64,
    pub step_rule: StepRule,
    /// Seed for restart initialization on the local-search path. The convex
    /// path is deterministic and ignores it.
    pub seed: Option<u64>,
    /// Starting points for the local-search path (the first is uniform).
    pub restarts: usize,
    /// Final weights at or below this are zeroed before normalization.
    pub prune_threshold: f64,
    /// The kernel counts as positive semidefinite when `K + floor * max_diag
    /// * I` admits a Cholesky factorization.
    pub psd_floor: f64,
    /// Record a sampled `(iteration, gap)` trace in the telemetry.
    pub record_trace: bool,
    /// Relative tolerance for the certificates attached to the result.
    pub cert_tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 200_000,
            tolerance: 1e-10,
            step_rule: StepRule::LineSearch,
            seed: None,
            restarts: 8,
            prune_threshold: 1e-12,
            psd_floor: 1e-10,
            record_trace: false,
            cert_tolerance: 1e-8,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let bad = |detail: String| Err(Error::BadParameter { detail });
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad(format!("tolerance {} must be positive", self.tolerance));
        }
        if self.restarts == 0 {
            return bad("restarts must be positive".into());
        }
        for (name, v) in [
            ("prune_threshold", self.prune_threshold),
            ("psd_floor", self.psd_floor),
            ("cert_tolerance", self.cert_tolerance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// The quadratic `mu' K mu`; reciprocal of the order-2 diversity.
pub fn quadratic_form(space: &SimilaritySpace, mu: &Measure) -> Result<f64> {
    if mu.len() != space.n() {
        return Err(Error::SizeMismatch {
            expected: space.n(),
            got: mu.len(),
        });
    }
    let w = DVector::from_column_slice(mu.weights());
    Ok(w.dot(&(space.kernel() * &w)))
}

/// State of one optimization run over the simplex.
struct RunOutcome {
    x: DVector<f64>,
    obj: f64,
    gap: f64,
    iterations: usize,
    restarts: usize,
    polished: bool,
    trace: Vec<(usize, f64)>,
    converged: bool,
}

fn gap_of(obj: f64, m: &DVector<f64>) -> f64 {
    2.0 * (obj - m.min())
}

/// Solves the weighting equation on the support of `x` and jumps to the
/// normalized weighting if it is feasible and does not increase the
/// objective. Returns whether a jump happened.
fn try_polish(
    kernel: &DMatrix<f64>,
    prune_threshold: f64,
    x: &mut DVector<f64>,
    m: &mut DVector<f64>,
    obj: &mut f64,
) -> bool {
    let support: Vec<usize> = (0..x.len())
        .filter(|&i| x[i] > prune_threshold)
        .collect();
    if support.is_empty() {
        return false;
    }
    let s = support.len();
    let sub = DMatrix::from_fn(s, s, |a, b| kernel[(support[a], support[b])]);
    let Some(w) = positive_weighting_lu(&sub, feasibility_tolerance(s)) else {
        return false;
    };
    let total = w.total();
    if total.is_nan() || total <= 0.0 {
        return false;
    }
    let mut y = DVector::zeros(x.len());
    for (j, &i) in support.iter().enumerate() {
        y[i] = w.weights()[j] / total;
    }
    let m_y = kernel * &y;
    let obj_y = y.dot(&m_y);
    // Allow a sub-ulp-scale regression: the balanced weighting can appear one
    // rounding step worse than a near-converged iterate yet still be the
    // exact optimum.
    if obj_y <= *obj * (1.0 + 1e-12) {
        *x = y;
        *m = m_y;
        *obj = obj_y;
        true
    } else {
        false
    }
}

/// Frank-Wolfe with away steps (or the fixed schedule) on `min x' K x`.
fn frank_wolfe(kernel: &DMatrix<f64>, opts: &SolverOptions, start: Option<DVector<f64>>) -> RunOutcome {
    let n = kernel.nrows();
    let mut x = match start {
        Some(mut s) => {
            s /= s.sum();
            s
        }
        None => DVector::from_element(n, 1.0 / n as f64),
    };
    let mut m = kernel * &x;
    let mut obj = x.dot(&m);
    let mut trace = Vec::new();
    let mut polished = false;
    let mut milestone = n.max(1);
    let mut polish_on_converge = true;
    let mut gap = gap_of(obj, &m);
    let mut converged = false;
    let mut iter = 0;

    while iter < opts.max_iters {
        if iter > 0 && iter % 256 == 0 {
            // Periodic refresh: renormalize and recompute against drift from
            // the incremental updates.
            x /= x.sum();
            m = kernel * &x;
            obj = x.dot(&m);
        }

        let mut s = 0;
        let mut m_s = f64::MAX;
        let mut v = 0;
        let mut m_v = f64::MIN;
        for i in 0..n {
            if m[i] < m_s {
                m_s = m[i];
                s = i;
            }
            if x[i] > 0.0 && m[i] > m_v {
                m_v = m[i];
                v = i;
            }
        }
        gap = 2.0 * (obj - m_s);
        if opts.record_trace && iter % 64 == 0 {
            trace.push((iter, gap));
        }

        if gap <= opts.tolerance {
            if polish_on_converge {
                polish_on_converge = false;
                if try_polish(kernel, opts.prune_threshold, &mut x, &mut m, &mut obj) {
                    polished = true;
                    gap = gap_of(obj, &m);
                    if gap > opts.tolerance {
                        iter += 1;
                        continue;
                    }
                }
            }
            converged = true;
            break;
        }

        if iter == milestone {
            milestone = milestone.saturating_mul(5);
            // A polish attempt costs a cubic solve in the support size.
            // Attempt it only once that cost is amortized by the linear work
            // already spent iterating, so that early attempts on huge,
            // not-yet-settled supports cannot dominate the whole run. The
            // attempt at convergence below stays unconditional.
            let support = x.iter().filter(|&&w| w > opts.prune_threshold).count() as f64;
            if support.powi(3) <= 64.0 * (iter as f64 + 1.0) * n as f64
                && try_polish(kernel, opts.prune_threshold, &mut x, &mut m, &mut obj)
            {
                polished = true;
                iter += 1;
                continue;
            }
        }

        match opts.step_rule {
            StepRule::Fixed => {
                let eta = 2.0 / (iter as f64 + 2.0);
                m.axpy(eta, &kernel.column(s).into_owned(), 1.0 - eta);
                obj = (1.0 - eta) * (1.0 - eta) * obj
                    + 2.0 * eta * (1.0 - eta) * m_s
                    + eta * eta * kernel[(s, s)];
                x *= 1.0 - eta;
                x[s] += eta;
            }
            StepRule::LineSearch => {
                let fw_desc = obj - m_s;
                let away_desc = m_v - obj;
                let away_feasible = x[v] < 1.0;
                if away_feasible && away_desc > fw_desc {
                    // Away step: shift mass off the worst supported vertex.
                    let den = obj - 2.0 * m_v + kernel[(v, v)];
                    let eta_max = x[v] / (1.0 - x[v]);
                    let eta_star = if den > f64::MIN_POSITIVE {
                        away_desc / den
                    } else {
                        f64::INFINITY
                    };
                    let eta = eta_star.min(eta_max);
                    m.axpy(-eta, &kernel.column(v).into_owned(), 1.0 + eta);
                    obj = (1.0 + eta) * (1.0 + eta) * obj
                        - 2.0 * eta * (1.0 + eta) * m_v
                        + eta * eta * kernel[(v, v)];
                    x *= 1.0 + eta;
                    if eta >= eta_max {
                        x[v] = 0.0; // drop step: leave the face exactly
                    } else {
                        x[v] -= eta;
                    }
                } else {
                    // Toward step onto the most atypical vertex.
                    let den = obj - 2.0 * m_s + kernel[(s, s)];
                    let eta = if den > f64::MIN_POSITIVE {
                        (fw_desc / den).clamp(0.0, 1.0)
                    } else {
                        1.0
                    };
                    if eta >= 1.0 {
                        x.fill(0.0);
                        x[s] = 1.0;
                        m = kernel.column(s).into_owned();
                        obj = kernel[(s, s)];
                    } else {
                        m.axpy(eta, &kernel.column(s).into_owned(), 1.0 - eta);
                        obj = (1.0 - eta) * (1.0 - eta) * obj
                            + 2.0 * eta * (1.0 - eta) * m_s
                            + eta * eta * kernel[(s, s)];
                        x *= 1.0 - eta;
                        x[s] += eta;
                    }
                }
            }
        }
        iter += 1;
    }

    if opts.record_trace {
        trace.push((iter, gap));
    }
    RunOutcome {
        x,
        obj,
        gap,
        iterations: iter,
        restarts: 0,
        polished,
        trace,
        converged,
    }
}

/// Multi-start projected gradient descent for indefinite kernels.
fn projected_gradient(
    kernel: &DMatrix<f64>,
    opts: &SolverOptions,
    start: Option<DVector<f64>>,
) -> Result<RunOutcome> {
    let n = kernel.nrows();
    let seed = opts.seed.unwrap_or(0x6d61_7864);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = (opts.max_iters / opts.restarts).max(1000);
    let dirichlet = if n >= 2 {
        Some(Dirichlet::new(&vec![1.0; n]).map_err(|e| Error::BadParameter {
            detail: format!("restart sampling failed: {e}"),
        })?)
    } else {
        None
    };

    let mut best: Option<RunOutcome> = None;
    let mut total_iters = 0usize;
    let mut trace = Vec::new();

    for restart in 0..opts.restarts {
        let mut x = if restart == 0 {
            match &start {
                Some(s) => {
                    let mut s = s.clone();
                    s /= s.sum();
                    s
                }
                None => DVector::from_element(n, 1.0 / n as f64),
            }
        } else {
            match &dirichlet {
                Some(d) => DVector::from_vec(d.sample(&mut rng)),
                None => DVector::from_element(n, 1.0),
            }
        };
        let mut m = kernel * &x;
        let mut obj = x.dot(&m);
        let mut gap = gap_of(obj, &m);
        let mut alpha = 1.0f64;
        let mut converged = gap <= opts.tolerance;

        for k in 0..budget {
            if converged {
                break;
            }
            total_iters += 1;
            let g = &m * 2.0;
            let mut step = alpha;
            let mut advanced = false;
            while step >= 1e-18 {
                let target: Vec<f64> = (0..n).map(|i| x[i] - step * g[i]).collect();
                let y = DVector::from_vec(linalg::project_to_simplex(&target));
                let diff = &y - &x;
                if diff.amax() == 0.0 {
                    break; // stationary: the projection returns the iterate
                }
                let m_y = kernel * &y;
                let obj_y = y.dot(&m_y);
                let lin = g.dot(&diff);
                if obj_y <= obj + 0.25 * lin + 1e-18 {
                    x = y;
                    m = m_y;
                    obj = obj_y;
                    alpha = (step * 1.5).min(1e6);
                    advanced = true;
                    break;
                }
                step *= 0.5;
            }
            gap = gap_of(obj, &m);
            if opts.record_trace && k % 64 == 0 {
                trace.push((total_iters, gap));
            }
            if gap <= opts.tolerance {
                converged = true;
            }
            if !advanced {
                break; // no acceptable step exists: first-order stationary
            }
        }

        let candidate = RunOutcome {
            x,
            obj,
            gap,
            iterations: total_iters,
            restarts: restart + 1,
            polished: false,
            trace: Vec::new(),
            converged,
        };
        // Strictly smaller objective wins; ties keep the earlier restart.
        if best.as_ref().is_none_or(|b| candidate.obj < b.obj) {
            best = Some(candidate);
        }
    }

    let mut out = best.expect("at least one restart runs");
    out.iterations = total_iters;
    out.restarts = opts.restarts;
    let mut m = kernel * &out.x;
    if try_polish(kernel, opts.prune_threshold, &mut out.x, &mut m, &mut out.obj) {
        out.polished = true;
        out.gap = gap_of(out.obj, &m);
        if out.gap <= opts.tolerance {
            out.converged = true;
        }
    }
    out.trace = trace;
    Ok(out)
}

/// Maximum diversity by numerical optimization.
///
/// Positive-semidefinite kernels get a certified convex solve; others get a
/// multi-start local search with `local_only` set on the result. Fails with
/// [`Error::NotConverged`] (carrying the partial result) when the iteration
/// budget runs out before the duality gap reaches the tolerance.
pub fn max_diversity_numeric(
    space: &SimilaritySpace,
    opts: &SolverOptions,
) -> Result<MaxDivResult> {
    max_diversity_numeric_with_start(space, opts, None)
}

/// As [`max_diversity_numeric`], from a caller-chosen starting point. Used to
/// probe uniqueness of the maximising measure: distinct starts converging to
/// distinct optima reveal a non-unique solution set.
pub(crate) fn max_diversity_numeric_with_start(
    space: &SimilaritySpace,
    opts: &SolverOptions,
    start: Option<DVector<f64>>,
) -> Result<MaxDivResult> {
    if !space.is_symmetric() {
        return Err(Error::AsymmetricKernel);
    }
    opts.validate()?;
    let kernel = space.kernel();
    let n = space.n();

    if n == 1 {
        let measure = Measure::dirac(1, 0)?;
        let value = 1.0 / kernel[(0, 0)];
        let telemetry = SolverTelemetry {
            iterations: 0,
            final_gap: 0.0,
            gap_trace: Vec::new(),
            restarts: 0,
            polished: false,
        };
        return finish_result(
            space,
            value,
            measure,
            SolverMethod::Convex,
            false,
            Some(telemetry),
            opts.cert_tolerance,
        );
    }

    let floor = opts.psd_floor * kernel.diagonal().max().max(1.0);
    let psd = space.is_psd_guaranteed() || linalg::psd_within_floor(kernel, floor);
    let mut outcome = if psd {
        frank_wolfe(kernel, opts, start)
    } else {
        projected_gradient(kernel, opts, start)?
    };

    // Prune dust and recompute the final state honestly from the kernel.
    let peak = outcome.x.amax();
    for i in 0..n {
        if outcome.x[i] <= opts.prune_threshold && outcome.x[i] < peak {
            outcome.x[i] = 0.0;
        }
    }
    outcome.x /= outcome.x.sum();
    let m = kernel * &outcome.x;
    outcome.obj = outcome.x.dot(&m);
    outcome.gap = gap_of(outcome.obj, &m);

    let support: Vec<usize> = (0..n).filter(|&i| outcome.x[i] > 0.0).collect();
    let weights: Vec<f64> = support.iter().map(|&i| outcome.x[i]).collect();
    let measure = normalize_weighting(&weights, &support, n)?;
    let value = 1.0 / outcome.obj;
    let telemetry = SolverTelemetry {
        iterations: outcome.iterations,
        final_gap: outcome.gap,
        gap_trace: outcome.trace.clone(),
        restarts: outcome.restarts,
        polished: outcome.polished,
    };

    let result = finish_result(
        space,
        value,
        measure,
        SolverMethod::Convex,
        !psd,
        Some(telemetry),
        opts.cert_tolerance,
    )?;
    if outcome.converged || outcome.gap <= opts.tolerance {
        Ok(result)
    } else {
        Err(Error::NotConverged {
            iterations: outcome.iterations,
            gap: outcome.gap,
            partial: Box::new(result),
        })
    }
}

/// Report from sampling measures against a claimed maximiser across orders.
#[derive(Debug, Clone, Serialize)]
pub struct OrderCheckReport {
    pub orders: Vec<Order>,
    /// Diversity of the claimed maximiser at each order.
    pub maximiser_diversities: Vec<f64>,
    /// Largest relative deviation of those diversities from the value.
    pub max_constancy_deviation: f64,
    /// Largest relative amount by which a sampled measure beat the claimed
    /// maximiser at any order (nonpositive excess clamps to zero).
    pub max_excess: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Default order grid for [`check_all_orders`].
pub fn default_check_orders() -> Vec<Order> {
    [0.0, 0.5, 1.0, 2.0, 10.0]
        .iter()
        .map(|&q| Order::new(q).expect("finite"))
        .chain([Order::INFINITY])
        .collect()
}

/// Spot-checks that `mu` maximises diversity at every order: its own profile
/// must be constant at `value`, and none of `samples` random measures may
/// exceed it (beyond `tol`, relative) at any order in the grid.
pub fn check_all_orders(
    space: &SimilaritySpace,
    mu: &Measure,
    value: f64,
    orders: Option<&[Order]>,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<OrderCheckReport> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::BadParameter {
            detail: format!("claimed value {value} must be positive and finite"),
        });
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::BadParameter {
            detail: format!("tolerance {tol} must be nonnegative"),
        });
    }
    mu.require_probability()?;
    let orders: Vec<Order> = match orders {
        Some(qs) => qs.to_vec(),
        None => default_check_orders(),
    };
    if orders.is_empty() {
        return Err(Error::BadParameter {
            detail: "empty order grid".into(),
        });
    }

    let mut maximiser_diversities = Vec::with_capacity(orders.len());
    let mut constancy = 0.0f64;
    for &q in &orders {
        let d = diversity(space, mu, q)?;
        constancy = constancy.max((d - value).abs() / value);
        maximiser_diversities.push(d);
    }

    let n = space.n();
    let mut excess = 0.0f64;
    if n >= 2 && samples > 0 {
        let dirichlet = Dirichlet::new(&vec![1.0; n]).map_err(|e| Error::BadParameter {
            detail: format!("sampling failed: {e}"),
        })?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let sample = Measure::new(dirichlet.sample(&mut rng))?;
            for (qi, &q) in orders.iter().enumerate() {
                let d = diversity(space, &sample, q)?;
                excess = excess.max((d - maximiser_diversities[qi]) / value);
            }
        }
    }

    Ok(OrderCheckReport {
        pass: constancy <= tol && excess <= tol,
        orders,
        maximiser_diversities,
        max_constancy_deviation: constancy,
        max_excess: excess,
        samples,
        tolerance: tol,
    })
}
