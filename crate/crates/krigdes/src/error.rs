//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by design construction, kriging algebra and the search
/// drivers.
#[derive(Debug, Error)]
pub enum KrigError {
    /// A size limit (grid capacity, enumeration cap) would be exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Malformed input data; `line` is 1-based and includes the header.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A precondition on arguments or configuration does not hold.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// External-drift trend references a covariate absent from the candidates.
    #[error("missing covariate '{0}'")]
    MissingCovariate(String),

    /// Fewer design points than trend functions.
    #[error("under-identified trend: design size {k} < {p} basis functions")]
    UnderIdentifiedTrend { k: usize, p: usize },

    /// Covariance matrix not positive definite even after jitter escalation.
    #[error("singular covariance matrix (jitter escalated to {max_jitter:e})")]
    SingularModel { max_jitter: f64 },

    /// A block that must be inverted (e.g. the increment block) is singular.
    #[error("singular block matrix: {0}")]
    SingularBlock(String),

    /// Chained log-determinant bookkeeping requested on an untracked state.
    #[error("stage state does not track a log-determinant")]
    UntrackedLogdet,

    /// Criterion values of different kinds were combined.
    #[error("criterion kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },

    /// Vector/matrix length differs from the contract.
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, KrigError>;
