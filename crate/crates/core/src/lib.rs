//! Similarity-sensitive diversity: profiles, magnitude, and maximisation.
//!
//! A finite space with similarities is a set of points together with a
//! square matrix of similarity coefficients — ones on the diagonal meaning
//! "identical to itself", zero meaning "nothing in common". Metric data fits
//! via the exponential transform `K = exp(-d)`. On such a space this crate
//! computes:
//!
//! - diversity and entropy profiles of a probability measure across all
//!   viewpoint orders, via power means ([`means`], [`diversity`]);
//! - magnitude and weightings, the linear-algebraic size of the space
//!   ([`magnitude`]);
//! - the maximum diversity and its maximising measure, exactly by subset
//!   enumeration ([`maxdiv_exact`]) or numerically by convex optimization
//!   ([`maxdiv_numeric`]), with independently checkable certificates;
//! - large-scale asymptotics under metric scaling: growth dimension, volume,
//!   and the limiting uniform measure ([`asymptotics`]).
//!
//! All routines are deterministic given their inputs (and seeds, where
//! randomness is involved) and return structured errors instead of panicking
//! on bad data.

#![forbid(unsafe_code)]

pub mod error;
pub mod spaces;
pub mod means;
pub(crate) mod linalg;
pub mod diversity;
pub mod magnitude;
pub mod maxdiv_exact;
pub mod maxdiv_numeric;
pub mod asymptotics;
pub mod io;

pub use error::{Error, Result};
pub use spaces::{Measure, Metric, SimilaritySpace};
pub use means::{mean_profile, power_mean, Order};
pub use diversity::{
    crossing_order, diversity, diversity_profile, entropy, is_balanced, typicality,
    BalanceReport, DiversityProfile, ProfileEntry,
};
pub use magnitude::{
    kernel_condition, magnitude, positive_weighting, weight_vector, WeightVector, Weighting,
};
pub use maxdiv_exact::{
    max_diversity_exact, verify_maximiser, MaxDivResult, OrderCheck, SolverMethod,
    SolverTelemetry, VerifyReport,
};
pub use maxdiv_numeric::{
    check_all_orders, default_check_orders, max_diversity_numeric, quadratic_form,
    OrderCheckReport, SolverOptions, StepRule,
};
pub use asymptotics::{
    log_spaced, minkowski_dimension_estimate, scaling_profile, uniform_measure_estimate,
    unit_ball_volume, volume_constant, volume_estimate, DimensionEstimate, MaxDivSolver,
    ScalePoint, ScalingProfile, UniformMeasureEstimate, VolumeEstimate,
};
pub use io::{
    fmt_f64, load_space, maxdiv_result_json, parse_f64, read_matrix_csv, read_measure_csv,
    read_points_csv, write_matrix_csv, write_profile_csv, write_scaling_csv, write_weights_csv,
    MetricName, SpaceDescriptor, SpaceKind,
};
