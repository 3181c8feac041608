use std::path::PathBuf;

use dpsc_core::DpscError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] DpscError),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// Process exit code: 2 for bad input, 3 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Core(DpscError::Io(_)) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
