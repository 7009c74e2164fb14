use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("solver: {0}")]
    Solver(String),
    #[error("property suite failed: {0}")]
    Property(String),
}

impl CliError {
    /// 1 configuration / IO, 2 solver failure, 3 property failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Solver(_) => 2,
            CliError::Property(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<proxnewton_core::Error> for CliError {
    fn from(e: proxnewton_core::Error) -> Self {
        match e {
            proxnewton_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Solver(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
