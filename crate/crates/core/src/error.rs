use thiserror::Error;

/// Errors raised anywhere in the simulation and oracle stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// Weight escaping the truncated number basis exceeded the configured cap.
    #[error("truncation overflow: leakage {leakage:.3e} exceeds cap {cap:.3e}")]
    TruncationOverflow { leakage: f64, cap: f64 },

    /// A probability-zero event was reached (e.g. a jump onto a null vector).
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("quadrature did not converge: estimated error {error:.3e} > tolerance {tolerance:.3e}")]
    Quadrature { error: f64, tolerance: f64 },

    #[error("Mandel Q undefined: mean count is zero")]
    QUndefined,

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
