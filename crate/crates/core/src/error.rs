//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A kernel received a NaN or infinite argument.
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    /// A parameter fell outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A documented precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The advective CFL constraint (tau/h)*L_q <= 1 would be exceeded.
    #[error("CFL violation: tau = {tau:.6e} exceeds stable limit {limit:.6e}")]
    CflViolation { tau: f64, limit: f64 },

    /// Pure advection was requested with a zero flow field.
    #[error("degenerate flow: {0}")]
    DegenerateFlow(String),

    /// Field/grid sizes do not line up.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Configuration parse or validation failure.
    #[error("config error: {0}")]
    Config(String),

    /// An internal invariant failed; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}
