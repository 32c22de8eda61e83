use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced while validating inputs or evaluating estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample must contain at least one observation")]
    EmptySample,
    #[error("observation {row}: observed time must be finite and non-negative, got {value}")]
    InvalidTime { row: usize, value: f64 },
    #[error("observation {row}: event indicator must be 0 or 1, got {value}")]
    InvalidDelta { row: usize, value: f64 },
    #[error("observation {row}: covariate vector has length {got}, expected {expected}")]
    CovariateLength {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("bandwidth rule requires n >= {min}, got {n}")]
    SampleTooSmall { n: usize, min: usize },
    #[error("bandwidth constant must be positive, got {0}")]
    InvalidBandwidthConstant(f64),
    #[error("observation {row}: censoring survival is zero at an uncensored time {z}")]
    InconsistentCensoringSurvival { row: usize, z: f64 },
    #[error("moment system for the higher-order kernel is singular")]
    SingularMomentSystem,
    #[error("target kernel order must be even and at least the base order, got {0}")]
    InvalidKernelOrder(usize),
    #[error("integrating density does not expose derivative of order {0}")]
    DensityDerivativeUnavailable(usize),
    #[error("standard deviation must be positive, got {0}")]
    ZeroSigma(f64),
    #[error("evaluation point {value} lies outside the fitted grid [{lo}, {hi}] on axis {axis}")]
    OutsideGrid {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("axis index {axis} out of range for dimension {d}")]
    AxisOutOfRange { axis: usize, d: usize },
    #[error("evaluation grid must be non-empty, strictly increasing and inside the axis interval")]
    InvalidGrid,
    #[error("generated response probability {p} at observation {row} is outside (0, 1)")]
    ProbabilityOutOfRange { row: usize, p: f64 },
    #[error("replicate {replicate} failed: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("data file line {line}: {message}")]
    CsvRow { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code contract: 1 for validation errors, 2 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SingularMomentSystem
            | Error::ZeroSigma(_)
            | Error::InconsistentCensoringSurvival { .. } => 2,
            Error::Replicate { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
