use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, malformed CSV, unreadable files.
    #[error("{0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) | CliError::Io(_) => ExitCode::from(2),
            CliError::Numerical(_) => ExitCode::from(3),
        }
    }
}

impl From<tvmfm::Error> for CliError {
    fn from(e: tvmfm::Error) -> Self {
        match e {
            tvmfm::Error::InvalidInput(_) | tvmfm::Error::DimensionMismatch { .. } | tvmfm::Error::TimeOutOfRange { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(format!("csv: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
