//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Error`]. The variants map
//! one-to-one onto the failure modes a caller can act on; [`Error::id`] gives a
//! stable machine-readable tag for each variant, used by the CLI when it emits
//! error JSON on stderr.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library.
#[derive(Debug, Error)]
pub enum Error {
    /// The time horizon or the delay is not an integer multiple of the step.
    #[error("grid not commensurate: {0}")]
    NotCommensurate(String),

    /// A numeric argument is outside its admissible range.
    #[error("invalid range: {0}")]
    InvalidRange(String),

    /// A refinement factor does not divide the grid it is applied to.
    #[error("not divisible: {0}")]
    NotDivisible(String),

    /// Two objects that must share a grid (or dimensions) do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A state update produced a non-finite value. `step` is the grid index
    /// of the failing update when known.
    #[error("non-finite state{}", step_suffix(.step))]
    NonFiniteState { step: Option<usize> },

    /// An estimator was asked to run on too few samples or data points.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A log-scale fit received a value that must be strictly positive.
    #[error("non-positive value: {0}")]
    NonPositiveValue(String),

    /// A path record flagged as exploded was passed where a complete path is
    /// required.
    #[error("record exploded at step {step}")]
    ExplodedRecord { step: usize },

    /// The problem catalog has no entry under the requested id.
    #[error("unknown problem: {0}")]
    UnknownProblem(String),

    /// The run configuration failed to parse or is internally inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// An underlying I/O operation failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn step_suffix(step: &Option<usize>) -> String {
    match step {
        Some(n) => format!(" at step {n}"),
        None => String::new(),
    }
}

impl Error {
    /// Stable machine-readable tag for this error variant.
    pub fn id(&self) -> &'static str {
        match self {
            Error::NotCommensurate(_) => "NotCommensurate",
            Error::InvalidRange(_) => "InvalidRange",
            Error::NotDivisible(_) => "NotDivisible",
            Error::GridMismatch(_) => "GridMismatch",
            Error::NonFiniteState { .. } => "NonFiniteState",
            Error::InsufficientData(_) => "InsufficientData",
            Error::NonPositiveValue(_) => "NonPositiveValue",
            Error::ExplodedRecord { .. } => "ExplodedRecord",
            Error::UnknownProblem(_) => "UnknownProblem",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
        }
    }
}
