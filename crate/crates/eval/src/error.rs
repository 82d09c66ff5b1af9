use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("directory not found: {}", .0.display())]
    DirectoryNotFound(PathBuf),
    #[error("{}: {reason}", path.display())]
    MalformedImage { path: PathBuf, reason: String },
    #[error("no prediction/ground-truth pairs found ({} unmatched predictions, {} unmatched ground truths)", unmatched_pred.len(), unmatched_gt.len())]
    NoPairsFound {
        unmatched_pred: Vec<String>,
        unmatched_gt: Vec<String>,
    },
    #[error("{}: {source}", path.display())]
    Mask {
        path: PathBuf,
        #[source]
        source: dar_core::Error,
    },
    #[error(transparent)]
    Core(#[from] dar_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image encoding error on {}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl EvalError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            EvalError::FileNotFound(path)
        } else {
            EvalError::Io { path, source }
        }
    }
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;
