use std::io;
use std::path::PathBuf;

/// Errors from the IO and command layer.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] momentlab_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

pub type AppResult<T> = Result<T, AppError>;

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> AppResult<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> AppResult<T> {
        self.map_err(|source| AppError::Io { path: path.into(), source })
    }
}
