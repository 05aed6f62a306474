//! Error type shared by every module of the crate.
//!
//! Variants are grouped by the stage that produces them: input validation
//! (space and measure construction, file parsing), numerical evaluation
//! (means, typicality, linear solves), and iterative solvers.

use crate::maxdiv_exact::MaxDivResult;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // ----- space and matrix validation -----
    /// A matrix that must be square is not.
    #[error("matrix is not square: {rows} rows x {cols} cols")]
    NonSquare { rows: usize, cols: usize },

    /// A kernel or coordinate entry is NaN or infinite where finiteness is required.
    #[error("non-finite entry {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    /// Kernel entries must be nonnegative.
    #[error("negative kernel entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    /// Self-similarity must be strictly positive.
    #[error("nonpositive diagonal entry {value} at index {index}")]
    NonpositiveDiagonal { index: usize, value: f64 },

    /// A supplied distance matrix has a negative entry or a nonzero diagonal.
    #[error("invalid distance matrix: {detail}")]
    NonmetricDistances { detail: String },

    /// Point rows (or label lists) disagree in length.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Point labels must be pairwise distinct.
    #[error("duplicate label {label:?}")]
    DuplicateLabel { label: String },

    /// The space carries no distance matrix, so it cannot be rescaled.
    #[error("space was not built from distances; scaling is undefined")]
    NotMetricOrigin,

    /// Scale factors must be positive and finite.
    #[error("scale factor must be positive and finite, got {value}")]
    NonpositiveScale { value: f64 },

    /// Spaces must contain at least one point.
    #[error("space must contain at least one point")]
    EmptySpace,

    /// An index list is out of range, unsorted, or contains repeats.
    #[error("invalid index subset: {detail}")]
    InvalidSubset { detail: String },

    // ----- measures and means -----
    /// Vector length differs from the number of points.
    #[error("size mismatch: expected {expected} entries, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    /// Measure weights must be nonnegative.
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    /// Measure weights must be finite.
    #[error("non-finite weight {value} at index {index}")]
    NonFiniteWeight { index: usize, value: f64 },

    /// Total mass must equal 1 (within 1e-12) where a probability measure is required.
    #[error("measure is not a probability distribution: total mass {total}")]
    NotProbability { total: f64 },

    /// A measure with zero total mass cannot be normalized.
    #[error("measure has zero total mass")]
    ZeroTotal,

    /// Power means require strictly positive arguments on the support.
    #[error("value {value} at supported index {index} is not strictly positive")]
    NonpositiveValueOnSupport { index: usize, value: f64 },

    /// Orders must not be NaN.
    #[error("order must not be NaN")]
    InvalidOrder,

    // ----- diversity -----
    /// Typicality underflowed on the support of the measure.
    #[error("typicality {value} at supported index {index} is below 1e-300; \
             kernel decay is too strong for this scale")]
    TypicalityUnderflow { index: usize, value: f64 },

    /// The diversity difference has the same sign at both bracket ends.
    #[error("no sign change on bracket [{lo}, {hi}]; profiles do not cross there")]
    NoSignChange { lo: f64, hi: f64 },

    /// A quantity that must be monotone along a grid is not, beyond numerical slack.
    #[error("monotonicity violated: {detail}")]
    NotMonotone { detail: String },

    // ----- weightings and solvers -----
    /// Weightings and maximisers are only defined for symmetric kernels here.
    #[error("kernel is not symmetric")]
    AsymmetricKernel,

    /// The kernel is singular and the all-ones vector is not in its range.
    #[error("weighting system is inconsistent (residual {residual:.3e})")]
    Inconsistent { residual: f64 },

    /// Subset enumeration rejected a space above the cap.
    #[error("space has {size} points, above the enumeration cap of {cap}")]
    TooLarge { size: usize, cap: usize },

    /// The iterative solver stopped before reaching its tolerance.
    #[error("solver did not converge: duality gap {gap:.3e} after {iterations} iterations")]
    NotConverged {
        iterations: usize,
        gap: f64,
        partial: Box<MaxDivResult>,
    },

    /// The maximising measure at some scale may not be unique.
    #[error("maximising measure at t = {t} may be non-unique: {detail}")]
    NonUniqueSuspected { t: f64, detail: String },

    /// A grid or scalar parameter is empty, unsorted, or out of range.
    #[error("invalid parameter: {detail}")]
    BadParameter { detail: String },

    // ----- i/o -----
    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// A CSV file failed to parse.
    #[error("{path}:{line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },

    /// The JSON space descriptor is malformed.
    #[error("invalid space descriptor: {detail}")]
    BadDescriptor { detail: String },

    /// A measure file refers to a label that is not in the space.
    #[error("unknown label {label:?}")]
    UnknownLabel { label: String },
}
