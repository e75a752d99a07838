use std::io;
use std::path::{Path, PathBuf};

/// Failures surfaced to the CLI. Each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: row {row}: {reason}")]
    StrictReject { path: PathBuf, row: usize, reason: &'static str },
    #[error("corpus has no accepted events")]
    EmptyCorpus,
    #[error("{0}")]
    Domain(String),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    /// 2 for environment failures, 1 for everything the input is to blame for.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
