use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("multi-level loss needs at least one level")]
    EmptyLevelList,

    #[error("{0}")]
    InvalidConfig(String),

    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),

    #[error("truncated PGM data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },

    #[error("unsupported PGM maxval {0} (expected 255 or 65535)")]
    UnsupportedMaxval(u32),

    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),

    #[error("malformed manifest: {0}")]
    MalformedManifest(String),

    #[error("no counterpart for '{stem}' in {dir}")]
    MissingPair { stem: String, dir: PathBuf },

    #[error("network produced a non-finite output")]
    NonFiniteOutput,

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {value}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, actual })
        }
    }
}
