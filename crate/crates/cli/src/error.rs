use fehlab_core::GeomError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(GeomError),

    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for everything
    /// that went wrong while computing or writing.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Output(_) => 3,
        }
    }
}

/// Errors that can only come from the parameters of a run are reported as
/// config errors.
impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        match e {
            GeomError::InvalidChart(_)
            | GeomError::AxisOutOfRange { .. }
            | GeomError::ResolutionTooSmall { .. }
            | GeomError::NotPeriodic
            | GeomError::InvalidFunction(_)
            | GeomError::InvalidParameter(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
