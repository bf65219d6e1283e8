use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] swbce::Error),

    #[error("{0}")]
    Usage(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed run manifest: {0}")]
    Manifest(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 verification failure, 2 usage or input error,
    /// 3 numerical abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Core(swbce::Error::NonFiniteLoss { .. })
            | CliError::Core(swbce::Error::NonFiniteOutput) => 3,
            _ => 2,
        }
    }
}
