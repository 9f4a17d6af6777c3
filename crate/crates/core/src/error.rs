use thiserror::Error;

/// Errors raised by the numerical toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field has zero charge")]
    ZeroCharge,

    #[error("boundary mass {fraction:.3e} exceeds the truncation threshold {threshold:.1e}")]
    BoundaryMass { fraction: f64, threshold: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
