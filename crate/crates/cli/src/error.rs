use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] reliascan_core::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("no baseline at {0}; run `reliascan baseline` first")]
    MissingBaseline(PathBuf),
    #[error("no trend data at {0}; run `reliascan analyze` first")]
    NoTrendData(PathBuf),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for bad input or configuration, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if !e.is_validation() => 1,
            CliError::Io { .. } => 1,
            _ => 2,
        }
    }
}
