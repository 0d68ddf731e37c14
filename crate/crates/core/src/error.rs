use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("pixel ({x}, {y}) outside {width}x{height} image")]
    OutOfBounds { x: f64, y: f64, width: u32, height: u32 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient overlap between frame and environment map ({fraction:.4} < {required:.4})")]
    InsufficientOverlap { fraction: f64, required: f64 },

    #[error("insufficient observation: {fraction:.4} of texels observed, {required:.4} required")]
    InsufficientObservation { fraction: f64, required: f64 },

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("time regression: {now_ms} ms after {last_ms} ms")]
    TimeRegression { now_ms: u64, last_ms: u64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed {format} data: {message}")]
    Format { format: &'static str, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
