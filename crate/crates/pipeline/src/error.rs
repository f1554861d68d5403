use std::path::{Path, PathBuf};

use hrrp_neural::NeuralError;
use thiserror::Error;

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    /// NaN/inf loss or a failed gradient check.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Signal(#[from] hrrp_core::Error),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

impl PipelineError {
    /// Process exit code: 2 config, 3 I/O, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Signal(_) => 2,
            Self::Io { .. } | Self::Format { .. } => 3,
            Self::Numerical(_) => 4,
            Self::Neural(NeuralError::Io(_) | NeuralError::Checkpoint(_)) => 3,
            Self::Neural(_) => 2,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}
