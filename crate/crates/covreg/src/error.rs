//! Error type shared by all modules.

use thiserror::Error;

/// Errors raised by the covariance regression library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index ({i}, {j}) out of range for dimension {dim}")]
    IndexOutOfRange { i: usize, j: usize, dim: usize },

    #[error("diagonal entry at index {0} not allowed: matrix has a zero diagonal by construction")]
    DiagonalEntry(usize),

    #[error("non-finite value {value} at entry ({i}, {j})")]
    NonFiniteValue { i: usize, j: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("matrix asymmetry {asymmetry:.3e} exceeds tolerance {tolerance:.3e}")]
    Asymmetric { asymmetry: f64, tolerance: f64 },

    #[error("empty basis: at least one similarity matrix is required")]
    EmptyBasis,

    #[error("zero matrix where a nonzero matrix is required")]
    ZeroMatrix,

    #[error("density must lie in (0, 1], got {0}")]
    InvalidDensity(f64),

    #[error("constant covariate column: kernel threshold undefined for density < 1")]
    ConstantColumn,

    #[error("column too short: need at least {need} entries, got {got}")]
    ColumnTooShort { need: usize, got: usize },

    #[error("self-loop edge ({0}, {0}) is not a valid similarity pair")]
    SelfLoop(usize),

    #[error("Bernoulli success probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("invalid penalty parameter: {0}")]
    InvalidPenalty(String),

    #[error("penalty functions are defined for t >= 0, got t = {0}")]
    NegativePenaltyArgument(f64),

    #[error("no observations: n must be at least {need}")]
    TooFewObservations { need: usize },

    #[error("gram system is singular or near-singular (condition estimate {cond:.3e})")]
    NearSingularGram { cond: f64 },

    #[error("coordinate {k} has zero curvature but a nonzero optimal update")]
    DegenerateCoordinate { k: usize },

    #[error("non-finite or negative weight at coordinate {k}")]
    InvalidWeight { k: usize },

    #[error("support set is empty")]
    EmptySupport,

    #[error("support index {index} out of range for {len} coefficients")]
    SupportOutOfRange { index: usize, len: usize },

    #[error("BIC undefined: {0}")]
    InvalidBic(String),

    #[error("tuning grid is empty")]
    EmptyGrid,

    #[error("tuning grid contains a non-positive lambda: {0}")]
    NonPositiveLambda(f64),

    #[error("every grid point failed; last error: {0}")]
    AllFitsFailed(Box<Error>),

    #[error("column {0} has zero variance")]
    ZeroVarianceColumn(usize),

    #[error("matrix is not positive definite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("return at period {t} is <= -1: {value}")]
    InvalidReturn { t: usize, value: f64 },

    #[error("window must satisfy 0 < window < number of periods ({periods}), got {window}")]
    InvalidWindow { window: usize, periods: usize },

    #[error("covariance estimation failed at out-of-sample period {period}: {source}")]
    WindowFailed { period: usize, source: Box<Error> },

    #[error("failed to draw a positive definite covariance after {0} attempts")]
    PdRetriesExhausted(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("triplet file parse error at line {line}: {message}")]
    TripletParse { line: usize, message: String },
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
