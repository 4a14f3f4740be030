use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },
    #[error("invalid override `{entry}`: {reason}")]
    Override { entry: String, reason: String },
    #[error(transparent)]
    Core(#[from] drdp_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 bad input, 2 no feasible `tau`, 3 I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 3,
            CliError::Core(drdp_core::Error::NoFeasibleTau { .. }) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
