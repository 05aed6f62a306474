//! Large-scale behavior of maximum diversity under metric scaling.
//!
//! For a space built from distances, scaling by `t` sends the kernel
//! `exp(-d)` to `exp(-t d)`. The map `t -> Dmax(tX)` is nondecreasing and
//! carries geometric information as `t` grows:
//!
//! - its log-log growth rate estimates the growth (Minkowski-type) dimension;
//! - for a set of dimension `n` in Euclidean space, `Dmax(tX) * n! * w_n /
//!   t^n` converges to the volume, where `w_n` is the unit-ball volume;
//! - the maximising measures converge to a limiting "uniform" measure.
//!
//! These estimators run on finite point sets standing in for continuous
//! bodies. A fixed grid stops approximating its continuum once the scale
//! resolves the grid: when `t` times the smallest positive distance exceeds
//! one, the kernel approaches the identity and the values saturate at the
//! point count. Dimension and volume estimates carry a `resolution_warning`
//! when their window crosses that line; the uniform-measure estimate warns in
//! the opposite case, since its target (the limit of the maximisers of the
//! given finite space) only emerges after the finest structure is resolved.

use rayon::prelude::*;
use serde::Serialize;

use crate::diversity::typicality;
use crate::error::{Error, Result};
use crate::linalg;
use crate::magnitude::{magnitude, CONDITION_CUTOFF};
use crate::maxdiv_exact::{max_diversity_exact, MaxDivResult};
use crate::maxdiv_numeric::{max_diversity_numeric_with_start, SolverOptions};
use crate::spaces::{Measure, Metric, SimilaritySpace};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

/// Default threshold on the final total-variation step of
/// [`uniform_measure_estimate`].
pub const DEFAULT_TV_THRESHOLD: f64 = 1e-3;

/// Total-variation disagreement between two solver runs above which the
/// maximising measure is reported as possibly non-unique.
pub const UNIQUENESS_TV: f64 = 1e-6;

/// Which maximum-diversity solver the scaling routines drive.
#[derive(Debug, Clone)]
pub enum MaxDivSolver {
    /// Subset enumeration: exact, exponential in the point count.
    Exact { cap: Option<usize> },
    /// Convex/numerical optimization.
    Convex(SolverOptions),
    /// Enumeration up to `cap` points, numerical above.
    Auto { cap: usize, options: SolverOptions },
}

impl Default for MaxDivSolver {
    fn default() -> Self {
        MaxDivSolver::Auto {
            cap: 12,
            options: SolverOptions::default(),
        }
    }
}

impl MaxDivSolver {
    /// Runs the configured solver on `space`.
    pub fn solve(&self, space: &SimilaritySpace) -> Result<MaxDivResult> {
        match self {
            MaxDivSolver::Exact { cap } => max_diversity_exact(space, *cap),
            MaxDivSolver::Convex(opts) => {
                max_diversity_numeric_with_start(space, opts, None)
            }
            MaxDivSolver::Auto { cap, options } => {
                if space.n() <= *cap {
                    max_diversity_exact(space, Some(*cap))
                } else {
                    max_diversity_numeric_with_start(space, options, None)
                }
            }
        }
    }

    /// Whether this solver resolves to the numerical path on `n` points.
    fn is_numeric_for(&self, n: usize) -> bool {
        match self {
            MaxDivSolver::Exact { .. } => false,
            MaxDivSolver::Convex(_) => true,
            MaxDivSolver::Auto { cap, .. } => n > *cap,
        }
    }

    fn numeric_options(&self) -> Option<&SolverOptions> {
        match self {
            MaxDivSolver::Exact { .. } => None,
            MaxDivSolver::Convex(opts) => Some(opts),
            MaxDivSolver::Auto { options, .. } => Some(options),
        }
    }
}

/// One solved scale in a [`ScalingProfile`].
#[derive(Debug, Clone, Serialize)]
pub struct ScalePoint {
    pub t: f64,
    /// Maximum diversity of the scaled space.
    pub dmax: f64,
    /// Total weight of the scaled space's weighting, when it exists.
    pub magnitude: Option<f64>,
    /// The maximising measure.
    pub measure: Measure,
    /// Final duality gap of the solve (zero for enumeration).
    pub gap: f64,
    /// False when the solve returned a partial (budget-exhausted) result.
    pub converged: bool,
}

/// Maximum diversity along an increasing grid of scale factors.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingProfile {
    pub points: Vec<ScalePoint>,
}

impl ScalingProfile {
    pub fn ts(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn dmax_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.dmax).collect()
    }

    /// Total-variation distances between successive maximising measures;
    /// one entry fewer than there are points.
    pub fn tv_steps(&self) -> Result<Vec<f64>> {
        self.points
            .windows(2)
            .map(|w| w[0].measure.tv_distance(&w[1].measure))
            .collect()
    }
}

fn check_scale_grid(ts: &[f64]) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::BadParameter {
            detail: "empty scale grid".into(),
        });
    }
    for (i, &t) in ts.iter().enumerate() {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::BadParameter {
                detail: format!("scale t = {t} must be positive and finite"),
            });
        }
        if i > 0 && t <= ts[i - 1] {
            return Err(Error::BadParameter {
                detail: format!("scale grid not strictly increasing at index {i}"),
            });
        }
    }
    Ok(())
}

/// Solves the maximum-diversity problem on `tX` for each `t` in `ts`.
///
/// Requires a space built from distances (scaling needs them) and a strictly
/// increasing positive grid. Budget-exhausted solves are recorded with their
/// partial values and `converged = false` rather than failing the profile;
/// all other solver errors propagate. The values must come out nondecreasing
/// in `t` up to a small slack (scaling up a metric space never reduces its
/// maximum diversity); a violation beyond slack plus the reported duality
/// gaps is an internal-consistency failure reported as [`Error::NotMonotone`].
pub fn scaling_profile(
    space: &SimilaritySpace,
    ts: &[f64],
    solver: &MaxDivSolver,
) -> Result<ScalingProfile> {
    if !space.is_metric_origin() {
        return Err(Error::NotMetricOrigin);
    }
    check_scale_grid(ts)?;

    let points: Vec<ScalePoint> = ts
        .par_iter()
        .map(|&t| -> Result<ScalePoint> {
            let scaled = space.scale(t)?;
            let (result, converged) = match solver.solve(&scaled) {
                Ok(r) => (r, true),
                Err(Error::NotConverged { partial, .. }) => (*partial, false),
                Err(e) => return Err(e),
            };
            let gap = result
                .telemetry
                .as_ref()
                .map_or(0.0, |tele| tele.final_gap);
            Ok(ScalePoint {
                t,
                dmax: result.value,
                magnitude: magnitude(&scaled).ok(),
                measure: result.measure,
                gap,
                converged,
            })
        })
        .collect::<Result<_>>()?;

    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        // A duality gap g on the quadratic shifts the value by up to g * v^2.
        let slack =
            1e-9 * b.dmax.max(1.0) + a.gap * a.dmax * a.dmax + b.gap * b.dmax * b.dmax;
        if b.dmax < a.dmax - slack {
            return Err(Error::NotMonotone {
                detail: format!(
                    "Dmax({} X) = {} exceeds Dmax({} X) = {}",
                    a.t, a.dmax, b.t, b.dmax
                ),
            });
        }
    }

    Ok(ScalingProfile { points })
}

/// Logarithmically spaced grid from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    if samples == 1 {
        return vec![hi];
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..samples)
        .map(|i| (llo + (lhi - llo) * i as f64 / (samples - 1) as f64).exp())
        .collect()
}

/// Least-squares fit of log growth against log scale.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionEstimate {
    /// Fitted slope: the dimension estimate.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Largest absolute fit residual.
    pub residual_band: f64,
    /// The fitted `(ln t, ln dmax)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Set when the largest scale resolves the grid (`t_hi` times the
    /// smallest positive distance exceeds one): values saturate toward the
    /// point count there and the slope is biased down.
    pub resolution_warning: bool,
}

/// Estimates the growth dimension of a point set from the slope of
/// `ln Dmax(tX)` against `ln t` over a log-spaced window.
pub fn minkowski_dimension_estimate(
    points: &[Vec<f64>],
    metric: Metric,
    t_lo: f64,
    t_hi: f64,
    samples: usize,
    solver: &MaxDivSolver,
) -> Result<DimensionEstimate> {
    if !(t_lo >= 1.0 && t_hi > t_lo && t_hi.is_finite()) {
        return Err(Error::BadParameter {
            detail: format!("need 1 <= t_lo < t_hi, got [{t_lo}, {t_hi}]"),
        });
    }
    if samples < 3 {
        return Err(Error::BadParameter {
            detail: format!("need at least 3 samples, got {samples}"),
        });
    }
    let space = SimilaritySpace::from_points(points, metric, 1.0, None)?;
    let ts = log_spaced(t_lo, t_hi, samples);
    let profile = scaling_profile(&space, &ts, solver)?;

    let xs: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = profile.points.iter().map(|p| p.dmax.ln()).collect();
    let (slope, intercept, r_squared, residual_band) = linalg::line_fit(&xs, &ys);
    let resolution_warning = space
        .min_positive_distance()
        .is_some_and(|d| t_hi * d > 1.0);
    Ok(DimensionEstimate {
        slope,
        intercept,
        r_squared,
        residual_band,
        points: xs.into_iter().zip(ys).collect(),
        resolution_warning,
    })
}

/// Volume estimate for a point set of known dimension.
#[derive(Debug, Clone, Serialize)]
pub struct VolumeEstimate {
    /// `dmax * constant / t^dim` at the largest sampled scale.
    pub estimate: f64,
    /// The normalization `dim! * w_dim` (`w_dim` = unit-ball volume).
    pub constant: f64,
    pub dim: usize,
    /// Per-scale estimates, as a convergence diagnostic.
    pub points: Vec<(f64, f64)>,
    /// Set when the largest scale resolves the grid; see
    /// [`DimensionEstimate::resolution_warning`].
    pub resolution_warning: bool,
}

/// Volume of the unit ball in the given dimension.
pub fn unit_ball_volume(dim: usize) -> f64 {
    // gamma_half(k) = Gamma(k / 2), by the recursion Gamma(x + 1) = x Gamma(x)
    // from Gamma(1/2) = sqrt(pi) and Gamma(1) = 1.
    fn gamma_half(k: usize) -> f64 {
        match k {
            1 => std::f64::consts::PI.sqrt(),
            2 => 1.0,
            _ => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
        }
    }
    std::f64::consts::PI.powf(dim as f64 / 2.0) / gamma_half(dim + 2)
}

/// The normalization constant `dim! * w_dim` relating maximum diversity
/// growth to volume.
pub fn volume_constant(dim: usize) -> f64 {
    let factorial: f64 = (1..=dim).map(|k| k as f64).product();
    factorial * unit_ball_volume(dim)
}

/// Estimates the volume of a point set in Euclidean space of dimension
/// `dim` from the growth of maximum diversity under scaling.
pub fn volume_estimate(
    points: &[Vec<f64>],
    dim: usize,
    t_lo: f64,
    t_hi: f64,
    samples: usize,
    solver: &MaxDivSolver,
) -> Result<VolumeEstimate> {
    if dim == 0 {
        return Err(Error::BadParameter {
            detail: "ambient dimension must be at least 1".into(),
        });
    }
    if !(t_lo > 0.0 && t_hi > t_lo && t_hi.is_finite()) {
        return Err(Error::BadParameter {
            detail: format!("need 0 < t_lo < t_hi, got [{t_lo}, {t_hi}]"),
        });
    }
    if samples < 2 {
        return Err(Error::BadParameter {
            detail: format!("need at least 2 samples, got {samples}"),
        });
    }
    let space = SimilaritySpace::from_points(points, Metric::Euclidean, 1.0, None)?;
    let ts = log_spaced(t_lo, t_hi, samples);
    let profile = scaling_profile(&space, &ts, solver)?;
    let constant = volume_constant(dim);
    let per_t: Vec<(f64, f64)> = profile
        .points
        .iter()
        .map(|p| (p.t, p.dmax * constant / p.t.powi(dim as i32)))
        .collect();
    let estimate = per_t.last().expect("samples >= 2").1;
    let resolution_warning = space
        .min_positive_distance()
        .is_some_and(|d| t_hi * d > 1.0);
    Ok(VolumeEstimate {
        estimate,
        constant,
        dim,
        points: per_t,
        resolution_warning,
    })
}

/// The limiting maximising measure, estimated at the largest sampled scale.
#[derive(Debug, Clone, Serialize)]
pub struct UniformMeasureEstimate {
    /// Maximising measure at the largest scale.
    pub measure: Measure,
    pub t_used: f64,
    /// Total-variation distances between successive maximising measures.
    pub convergence_diag: Vec<f64>,
    /// Whether the last diagnostic step is at or below the threshold.
    pub converged: bool,
    pub tv_threshold: f64,
    /// Set when even the largest scale does not separate the two closest
    /// points (`t_used` times the smallest positive distance at most one):
    /// the limit may still be far.
    pub resolution_warning: bool,
}

/// Estimates the limit of the maximising measures as the scale grows, with
/// total-variation convergence diagnostics.
///
/// The limit only makes sense when the maximiser at each scale is unique.
/// Two checks guard this at the largest scale: on the numerical path, a
/// second solve from a randomized start must agree within [`UNIQUENESS_TV`]
/// in total variation; and for a positive-semidefinite kernel, the kernel
/// restricted to the balanced-level set (all points whose typicality sits at
/// the reciprocal value) must be numerically nonsingular, since two distinct
/// maximisers differ by a null vector of exactly that submatrix. Either
/// failure is reported as [`Error::NonUniqueSuspected`]. An indefinite kernel
/// solved by enumeration gets no probe.
pub fn uniform_measure_estimate(
    space: &SimilaritySpace,
    ts: &[f64],
    solver: &MaxDivSolver,
    tv_threshold: Option<f64>,
) -> Result<UniformMeasureEstimate> {
    let tv_threshold = tv_threshold.unwrap_or(DEFAULT_TV_THRESHOLD);
    if !(tv_threshold > 0.0 && tv_threshold.is_finite()) {
        return Err(Error::BadParameter {
            detail: format!("tv threshold {tv_threshold} must be positive"),
        });
    }
    if ts.len() < 2 {
        return Err(Error::BadParameter {
            detail: "need at least two scales for convergence diagnostics".into(),
        });
    }
    let profile = scaling_profile(space, ts, solver)?;
    let convergence_diag = profile.tv_steps()?;
    let last = profile.points.last().expect("nonempty grid");
    let t_used = last.t;

    check_uniqueness(space, solver, last)?;

    let converged = *convergence_diag.last().expect("two scales") <= tv_threshold;
    let resolution_warning = space
        .min_positive_distance()
        .is_some_and(|d| t_used * d <= 1.0);
    Ok(UniformMeasureEstimate {
        measure: last.measure.clone(),
        t_used,
        convergence_diag,
        converged,
        tv_threshold,
        resolution_warning,
    })
}

/// Uniqueness probes for the maximising measure at one scale point.
fn check_uniqueness(
    space: &SimilaritySpace,
    solver: &MaxDivSolver,
    point: &ScalePoint,
) -> Result<()> {
    let scaled = space.scale(point.t)?;
    let n = scaled.n();

    if solver.is_numeric_for(n) && n >= 2 {
        let opts = solver.numeric_options().expect("numeric path has options");
        let mut probe_opts = opts.clone();
        let probe_seed = opts.seed.unwrap_or(0x6d61_7864) ^ 0x9E37_79B9;
        probe_opts.seed = Some(probe_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(probe_seed);
        let dirichlet = Dirichlet::new(&vec![1.0; n]).map_err(|e| Error::BadParameter {
            detail: format!("probe sampling failed: {e}"),
        })?;
        let start = DVector::from_vec(dirichlet.sample(&mut rng));
        let second = match max_diversity_numeric_with_start(&scaled, &probe_opts, Some(start)) {
            Ok(r) => r.measure,
            Err(Error::NotConverged { partial, .. }) => partial.measure,
            Err(e) => return Err(e),
        };
        let tv = point.measure.tv_distance(&second)?;
        if tv > UNIQUENESS_TV {
            return Err(Error::NonUniqueSuspected {
                t: point.t,
                detail: format!("two solver starts disagree by TV {tv:.3e}"),
            });
        }
    }

    // For a positive-semidefinite kernel, distinct maximisers differ by a
    // null vector of the kernel restricted to the balanced-level set, so a
    // numerically singular restriction flags non-uniqueness.
    let kernel = scaled.kernel();
    let floor = 1e-10 * kernel.diagonal().max().max(1.0);
    if scaled.is_psd_guaranteed() || linalg::psd_within_floor(kernel, floor) {
        let bound = 1.0 / point.dmax;
        let kmu = typicality(&scaled, &point.measure)?;
        let level: Vec<usize> = (0..n)
            .filter(|&i| kmu[i] <= bound * (1.0 + 1e-8))
            .collect();
        if level.len() >= 2 {
            let sub = DMatrix::from_fn(level.len(), level.len(), |a, b| {
                kernel[(level[a], level[b])]
            });
            let cond = linalg::condition_estimate_symmetric(&sub);
            if cond >= CONDITION_CUTOFF {
                return Err(Error::NonUniqueSuspected {
                    t: point.t,
                    detail: format!(
                        "balanced-level-set kernel is numerically singular \
                         (condition estimate {cond:.3e})"
                    ),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diversity::diversity;
    use crate::means::Order;

    fn grid_points(n: usize, len: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![len * i as f64 / (n - 1) as f64])
            .collect()
    }

    fn line_space(n: usize, len: f64) -> SimilaritySpace {
        SimilaritySpace::from_points(&grid_points(n, len), Metric::Euclidean, 1.0, None)
            .unwrap()
    }

    fn scatter_space() -> SimilaritySpace {
        let pts = vec![
            vec![0.0, 0.0],
            vec![1.1, 0.3],
            vec![0.4, 1.7],
            vec![2.3, 1.2],
            vec![1.6, 2.8],
        ];
        SimilaritySpace::from_points(&pts, Metric::Euclidean, 1.0, None).unwrap()
    }

    #[test]
    fn one_point_profile_is_constantly_one() {
        let s = line_space(2, 1.0).restrict(&[0]).unwrap();
        let profile = scaling_profile(&s, &[1.0, 2.0, 4.0], &MaxDivSolver::default()).unwrap();
        for p in &profile.points {
            assert_eq!(p.dmax, 1.0);
            assert!(p.converged);
        }
    }

    #[test]
    fn two_point_profile_matches_closed_form() {
        let s = line_space(2, 1.0);
        let profile = scaling_profile(&s, &[1.0, 2.0, 4.0], &MaxDivSolver::default()).unwrap();
        for p in &profile.points {
            let expect = 2.0 / (1.0 + (-p.t).exp());
            assert!((p.dmax - expect).abs() < 1e-12, "t={}: {}", p.t, p.dmax);
            assert!((p.magnitude.unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn profile_approaches_the_point_count() {
        let s = scatter_space();
        let profile =
            scaling_profile(&s, &[1.0, 5.0, 50.0], &MaxDivSolver::default()).unwrap();
        let last = profile.points.last().unwrap();
        assert!((last.dmax - 5.0).abs() < 1e-3, "{}", last.dmax);
    }

    #[test]
    fn profile_requires_metric_origin_and_a_sane_grid() {
        let k = SimilaritySpace::from_kernel_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert!(matches!(
            scaling_profile(&k, &[1.0, 2.0], &MaxDivSolver::default()),
            Err(Error::NotMetricOrigin)
        ));
        let s = line_space(3, 1.0);
        for bad in [vec![], vec![2.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]] {
            assert!(matches!(
                scaling_profile(&s, &bad, &MaxDivSolver::default()),
                Err(Error::BadParameter { .. })
            ));
        }
    }

    #[test]
    fn single_point_dimension_is_zero() {
        let est = minkowski_dimension_estimate(
            &[vec![0.0]],
            Metric::Euclidean,
            1.0,
            10.0,
            3,
            &MaxDivSolver::default(),
        )
        .unwrap();
        assert_eq!(est.slope, 0.0);
        assert!(!est.resolution_warning);
    }

    #[test]
    fn interval_grid_dimension_is_near_one() {
        let est = minkowski_dimension_estimate(
            &grid_points(101, 1.0),
            Metric::Euclidean,
            10.0,
            60.0,
            5,
            &MaxDivSolver::default(),
        )
        .unwrap();
        assert!(
            est.slope > 0.8 && est.slope < 1.05,
            "slope = {}",
            est.slope
        );
        assert!(est.r_squared > 0.99);
        assert!(est.residual_band >= 0.0);
        assert_eq!(est.points.len(), 5);
        assert!(!est.resolution_warning);
    }

    #[test]
    fn over_resolved_window_sets_the_warning() {
        let est = minkowski_dimension_estimate(
            &grid_points(11, 1.0),
            Metric::Euclidean,
            1.0,
            100.0,
            4,
            &MaxDivSolver::default(),
        )
        .unwrap();
        // t_hi * h = 100 * 0.1 = 10 > 1: saturated window.
        assert!(est.resolution_warning);
    }

    #[test]
    fn dimension_estimate_validates_its_window() {
        let pts = grid_points(5, 1.0);
        let solver = MaxDivSolver::default();
        for (lo, hi, k) in [(0.5, 10.0, 3), (10.0, 1.0, 3), (1.0, 10.0, 2)] {
            assert!(matches!(
                minkowski_dimension_estimate(&pts, Metric::Euclidean, lo, hi, k, &solver),
                Err(Error::BadParameter { .. })
            ));
        }
    }

    #[test]
    fn unit_ball_volumes_are_classical() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
        assert_eq!(volume_constant(1), 2.0);
        assert!((volume_constant(2) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn interval_volume_estimates_its_length() {
        let solver = MaxDivSolver::default();
        let est =
            volume_estimate(&grid_points(101, 1.0), 1, 10.0, 40.0, 3, &solver).unwrap();
        assert!((est.estimate - 1.0).abs() < 0.1, "{}", est.estimate);
        assert!(!est.resolution_warning);

        let doubled =
            volume_estimate(&grid_points(101, 2.0), 1, 10.0, 40.0, 3, &solver).unwrap();
        assert!((doubled.estimate - 2.0).abs() < 0.2, "{}", doubled.estimate);
    }

    #[test]
    fn single_point_volume_vanishes() {
        let est = volume_estimate(
            &[vec![0.0]],
            1,
            50.0,
            100.0,
            2,
            &MaxDivSolver::default(),
        )
        .unwrap();
        assert!(est.estimate < 0.03, "{}", est.estimate);
    }

    #[test]
    fn scattered_points_limit_to_counting_uniform() {
        let s = scatter_space();
        let est = uniform_measure_estimate(
            &s,
            &[5.0, 10.0, 20.0, 40.0, 80.0],
            &MaxDivSolver::default(),
            None,
        )
        .unwrap();
        let uniform = Measure::uniform(5).unwrap();
        assert!(est.measure.tv_distance(&uniform).unwrap() <= 0.02);
        assert!(est.converged);
        assert_eq!(est.t_used, 80.0);
        assert_eq!(est.convergence_diag.len(), 4);
        assert!(!est.resolution_warning);
    }

    #[test]
    fn homogeneous_cycle_is_uniform_at_every_scale() {
        // Five-point cycle under the hop-count metric: every point looks the
        // same, so the maximiser is exactly uniform at each scale.
        let n = 5;
        let hop = |i: usize, j: usize| {
            let d = (i as i32 - j as i32).rem_euclid(n as i32);
            d.min(n as i32 - d) as f64
        };
        let dist = nalgebra::DMatrix::from_fn(n, n, hop);
        let s = SimilaritySpace::from_distances(dist, 1.0, None).unwrap();
        let profile =
            scaling_profile(&s, &[1.0, 2.0, 4.0], &MaxDivSolver::default()).unwrap();
        for p in &profile.points {
            for &w in p.measure.weights() {
                assert!((w - 0.2).abs() < 1e-9, "t={}: {w}", p.t);
            }
        }
        let est =
            uniform_measure_estimate(&s, &[1.0, 2.0, 4.0], &MaxDivSolver::default(), None)
                .unwrap();
        assert!(est.converged);
        for d in &est.convergence_diag {
            assert!(*d < 1e-9);
        }
    }

    #[test]
    fn uniform_estimate_is_scale_invariant() {
        let s = scatter_space();
        let a = 2.5;
        let pre_scaled = s.scale(a).unwrap();
        let solver = MaxDivSolver::default();
        let direct =
            uniform_measure_estimate(&s, &[5.0, 10.0, 20.0], &solver, None).unwrap();
        let via = uniform_measure_estimate(
            &pre_scaled,
            &[5.0 / a, 10.0 / a, 20.0 / a],
            &solver,
            None,
        )
        .unwrap();
        assert!(direct.measure.tv_distance(&via.measure).unwrap() <= 1e-9);
    }

    #[test]
    fn duplicate_points_trip_the_uniqueness_probe() {
        let pts = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]];
        let s = SimilaritySpace::from_points(&pts, Metric::Euclidean, 1.0, None).unwrap();
        match uniform_measure_estimate(&s, &[1.0, 2.0], &MaxDivSolver::default(), None) {
            Err(Error::NonUniqueSuspected { t, .. }) => assert_eq!(t, 2.0),
            other => panic!("expected NonUniqueSuspected, got {other:?}"),
        }
    }

    #[test]
    fn sandwich_between_magnitude_and_volume_growth() {
        // Per scale: magnitude >= dmax >= diversity of counting-uniform
        // >= t * length / normalization, on an interval grid.
        let s = line_space(51, 1.0);
        let uniform = Measure::uniform(51).unwrap();
        let profile =
            scaling_profile(&s, &[2.0, 5.0, 10.0], &MaxDivSolver::default()).unwrap();
        for p in &profile.points {
            let scaled = s.scale(p.t).unwrap();
            let d2 = diversity(&scaled, &uniform, Order::TWO).unwrap();
            let lower = p.t * 1.0 / volume_constant(1);
            let mag = p.magnitude.unwrap();
            assert!(mag >= p.dmax - 1e-9, "t={}: {} < {}", p.t, mag, p.dmax);
            assert!(p.dmax >= d2 - 1e-9, "t={}: {} < {}", p.t, p.dmax, d2);
            assert!(d2 >= lower - 1e-9, "t={}: {} < {}", p.t, d2, lower);
        }
    }

    #[test]
    fn dmax_tracks_magnitude_on_interval_grids() {
        let s = line_space(101, 1.0);
        let profile = scaling_profile(&s, &[100.0], &MaxDivSolver::default()).unwrap();
        let p = &profile.points[0];
        assert!(p.dmax / p.magnitude.unwrap() >= 0.9);
    }
}
