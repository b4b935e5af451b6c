use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },

    #[error("inconsistent model: {0}")]
    Consistency(String),

    #[error("duplicate {kind} {key}")]
    DuplicateKey { kind: &'static str, key: String },

    #[error("detections format: {0}")]
    Format(String),

    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    Dimension(u32, u32, u32, u32),

    #[error("invalid value: {0}")]
    Validation(String),

    #[error("unknown instance id {0}")]
    UnknownInstance(u32),

    #[error("scene generation: {0}")]
    Generation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
