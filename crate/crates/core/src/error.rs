use thiserror::Error;

/// Errors raised by the solver library.
///
/// Every variant maps onto one of the machine-readable kind tags returned by
/// [`Error::kind`], which the command-line front end uses to pick an exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// The combinatorial instance violates one of its structural invariants.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An exact enumeration or search was refused because the instance is too large.
    #[error("scale guard: {0}")]
    ScaleGuard(String),

    /// A mathematical identity that must hold did not.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    /// An iterative method failed to reach its tolerance.
    #[error("numerical convergence failure: {0}")]
    NumericalConvergence(String),

    /// Malformed input file.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    /// Scenario data does not match the ground set of the instance.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short tag describing the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInstance(_) => "invalid-instance",
            Error::Domain(_) => "domain",
            Error::ScaleGuard(_) => "scale-guard",
            Error::InvariantViolation(_) => "invariant-violation",
            Error::NumericalConvergence(_) => "numerical-convergence",
            Error::Parse { .. } => "parse",
            Error::Dimension(_) => "dimension",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInstance(msg.into())
}

pub(crate) fn guard(msg: impl Into<String>) -> Error {
    Error::ScaleGuard(msg.into())
}
