use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit status per error class.
pub mod exit {
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const VALIDATION: u8 = 4;
    pub const DIVERGENCE: u8 = 5;
    pub const GRADCHECK: u8 = 6;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] lexspec_core::Error),
    #[error("gradient check failed: {0}")]
    GradCheck(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) => exit::USAGE,
            Error::Io { .. } => exit::IO,
            Error::Parse { .. } | Error::Validation(_) => exit::VALIDATION,
            Error::Core(lexspec_core::Error::Divergence { .. }) => exit::DIVERGENCE,
            Error::Core(_) => exit::VALIDATION,
            Error::GradCheck(_) => exit::GRADCHECK,
        }
    }
}
