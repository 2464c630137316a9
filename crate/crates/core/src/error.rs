use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("partitions disagree on series length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("empty block")]
    EmptyBlock,

    #[error("non-positive variance {value} at index {index}")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data or its files rather than by
    /// the program configuration or the runtime.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidData(_) | Error::Parse { .. } | Error::Io { .. }
        )
    }
}
