use std::path::PathBuf;

use thiserror::Error;

use slowfast_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid config: {0}")]
    Parameter(#[source] CoreError),
    #[error("realization {realization}: {source}")]
    Simulation {
        realization: usize,
        #[source]
        source: CoreError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl CliError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 config, 2 numerical blowup, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parameter(_) => 1,
            CliError::Simulation { source, .. } => match source {
                CoreError::NumericalBlowup { .. } | CoreError::Singularity { .. } => 2,
                _ => 1,
            },
            CliError::Io { .. } | CliError::Csv { .. } => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Parameter(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
