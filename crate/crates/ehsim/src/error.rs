use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ehsim_core::Error),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("invalid document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column}: {message}")]
    Parse {
        row: u64,
        column: usize,
        message: String,
    },
    #[error("row {row}: {reason}")]
    InvalidRow { row: u64, reason: String },
    #[error("file contains no samples")]
    Empty,
    #[error("override `{key}`: {reason}")]
    Override { key: String, reason: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::File { path, source }
    }
}
