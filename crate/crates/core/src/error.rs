use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("quadrature did not reach tolerance {tol:e} (achieved error bound {achieved:e})")]
    Quadrature { tol: f64, achieved: f64 },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("sets overlap: {0}")]
    Overlap(String),

    #[error("simulation failed: {reason} (minimum eigenvalue/pivot {min_eigen:e})")]
    Simulation { reason: String, min_eigen: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
