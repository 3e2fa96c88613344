use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("ingestion error for {path}: {msg}")]
    Ingestion { path: PathBuf, msg: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid request: {0}")]
    Request(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("architecture error: {0}")]
    Architecture(String),
    #[error("persistence error: {0}")]
    Persistence(String),
    #[error("episode error: {0}")]
    Episode(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable identifier, used for machine-parsable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Format { .. } => "format",
            Error::Consistency(_) => "consistency",
            Error::Ingestion { .. } => "ingestion",
            Error::Dimension(_) => "dimension",
            Error::InsufficientData(_) => "insufficient-data",
            Error::Request(_) => "request",
            Error::Degenerate(_) => "degenerate-input",
            Error::Architecture(_) => "architecture",
            Error::Persistence(_) => "persistence",
            Error::Episode(_) => "episode",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
        }
    }
}
