use thiserror::Error;

/// Errors raised by grid, tensor and variation operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("axis {axis} out of range for a {dim}-dimensional chart")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("axis {axis} has {resolution} nodes, stencil needs at least {needed}")]
    ResolutionTooSmall {
        axis: usize,
        resolution: usize,
        needed: usize,
    },

    #[error("fields live on different charts")]
    ChartMismatch,

    #[error("operation requires a fully periodic chart")]
    NotPeriodic,

    #[error("metric is not positive definite at node {node} (coordinates {coords:?})")]
    NotPositiveDefinite { node: usize, coords: Vec<f64> },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid F function: {0}")]
    InvalidFunction(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("theorem hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for GeomError {
    fn from(e: std::io::Error) -> Self {
        GeomError::Io(e.to_string())
    }
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;
