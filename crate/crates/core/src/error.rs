use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported mesh size {n} for {kind}: {reason}")]
    UnsupportedSize {
        kind: &'static str,
        n: usize,
        reason: &'static str,
    },

    #[error("MZI {0} is not independently accessible")]
    NotAccessible(usize),

    #[error("MZIs {0:?} are not independently accessible")]
    InaccessibleSet(Vec<usize>),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed IDX file at byte offset {offset}: {reason}")]
    Idx { offset: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MeshError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MeshError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = MeshError> = std::result::Result<T, E>;
