use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] higsfa::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{what} not prepared under {}: {hint}", dir.display())]
    Preparation {
        what: String,
        dir: PathBuf,
        hint: String,
    },
    #[error("report: {0}")]
    Report(String),
    #[error("corrupt record in {}: {msg}", path.display())]
    Record { path: PathBuf, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl BenchError {
    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::Core(e) => e.kind(),
            BenchError::Config(_) => "config",
            BenchError::Preparation { .. } => "preparation",
            BenchError::Report(_) => "report",
            BenchError::Record { .. } => "record",
            BenchError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
