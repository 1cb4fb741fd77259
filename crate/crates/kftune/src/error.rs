use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error("bad header in {path}: expected `{expected}`, found `{found}`")]
    BadHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("time column is not uniformly spaced at row {row}")]
    NonUniformTime { row: usize },
    #[error("non-finite or unparsable cell at row {row}, column {column}")]
    NonFiniteCell { row: usize, column: usize },
    #[error("{0}")]
    InvalidConfig(String),
    #[error("io failure on {path}: {message}")]
    IoFailure { path: PathBuf, message: String },
    #[error("every run diverged")]
    AllRunsDiverged,
    #[error(transparent)]
    Core(#[from] kftune_core::Error),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Self::IoFailure {
            path: path.into(),
            message: err.to_string(),
        }
    }

    /// True for failures caused by the filter blowing up rather than by input.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Self::AllRunsDiverged | Self::Core(kftune_core::Error::FilterDiverged { .. })
        )
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
