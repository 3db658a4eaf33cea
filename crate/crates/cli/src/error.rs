use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Config(_) => ExitCode::from(2),
            Self::Numerical(_) => ExitCode::from(3),
            Self::Io(_) => ExitCode::FAILURE,
        }
    }

    pub fn numerical(e: impl std::fmt::Display) -> Self {
        Self::Numerical(e.to_string())
    }
}
