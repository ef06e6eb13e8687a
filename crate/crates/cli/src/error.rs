use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error("input error in {path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("ensemble error: {0}")]
    Ensemble(String),
    #[error("fit failure: {0}")]
    Fit(String),
    #[error("worker failure: {0}")]
    Worker(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } | CliError::Input { .. } => 2,
            CliError::Ensemble(_) => 3,
            CliError::Fit(_) => 4,
            CliError::Worker(_) | CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<mipt_core::ensembles::EnsembleError> for CliError {
    fn from(e: mipt_core::ensembles::EnsembleError) -> Self {
        CliError::Ensemble(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
