use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed content: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("resource limit: {0}")]
    Resource(String),
    #[error(transparent)]
    Sim(#[from] spinflux::Error),
    #[error("stopped after {completed} work units; rerun with --resume {token} to continue")]
    Interrupted { completed: usize, token: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Corrupt { .. } => EXIT_CONFIG,
            CliError::Sim(spinflux::Error::TooLarge { .. }) => EXIT_RESOURCE,
            CliError::Sim(_) => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Resource(_) | CliError::Interrupted { .. } => EXIT_RESOURCE,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
