use nalgebra::Vector3;
use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target outside leg workspace; nearest reachable point {clamped:?}")]
    OutOfWorkspace { clamped: Vector3<f64> },

    #[error("x = {x} outside terrain extent [{min}, {max}]")]
    OutOfBounds { x: f64, min: f64, max: f64 },

    #[error("invalid log: {0}")]
    InvalidLog(String),

    #[error("stride displacement {0} m too small for a cost of transport")]
    UndefinedDisplacement(f64),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("strategy error: {0}")]
    Strategy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn invalid_config(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
