use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("occupation {occupation:?} is not valid under cutoffs {cutoffs:?}")]
    InvalidOccupation {
        occupation: Vec<u32>,
        cutoffs: Vec<u32>,
    },

    #[error("layout mismatch: expected {expected:?}, found {found:?}")]
    LayoutMismatch { expected: Vec<u32>, found: Vec<u32> },

    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("state has no components")]
    EmptyState,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid logical label {label:?} (expected {expected} bits)")]
    InvalidLabel { label: String, expected: usize },

    #[error("operation not supported for this code: {0}")]
    Unsupported(String),

    #[error("occupation overflow: mode {mode} would reach {value} above cutoff {cutoff}")]
    Overflow {
        mode: usize,
        value: u32,
        cutoff: u32,
    },

    #[error("operator too large to materialize ({0} basis states)")]
    TooLarge(u128),

    #[error("recovery operator is numerically singular on its support (condition {condition:e})")]
    SingularRecovery { condition: f64 },

    #[error("scaling fit needs at least two usable points, found {0}")]
    InsufficientFitPoints(usize),

    #[error("malformed syndrome: {0}")]
    MalformedSyndrome(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
