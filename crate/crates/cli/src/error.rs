use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Numerical(#[from] ctrlscore::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 0 success, 1 usage, 2 parse, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::Parse { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn parse(path: &str, line: u64, column: usize, message: impl Into<String>) -> Self {
        CliError::Parse { path: path.to_string(), line, column, message: message.into() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
