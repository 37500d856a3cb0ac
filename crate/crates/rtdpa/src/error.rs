use std::path::PathBuf;

/// Failures surfaced by file handling and commands.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] rtdpa_core::Error),
    #[error("model file: {0}")]
    ModelFile(#[from] crate::model_file::ModelFileError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }

    pub fn write(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Write { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        AppError::Parse { path: path.into(), message: message.to_string() }
    }

    /// 2 for bad input or configuration, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Internal(_) | AppError::Write { .. } => 1,
            _ => 2,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
