use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
///
/// Each variant maps onto a stable, machine-parsable class name (see
/// [`Error::class`]) which the command-line front end prints on failure.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid segment: expected {expected} samples per channel, got {actual}")]
    InvalidSegment { expected: usize, actual: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate vector: zero norm")]
    DegenerateVector,

    #[error("embedding set is empty")]
    EmptySet,

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("stream mismatch: {0}")]
    StreamMismatch(String),

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("model has not been trained")]
    ModelNotTrained,

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short class name, stable across releases.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InsufficientData(_) => "InsufficientData",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::InvalidSegment { .. } => "InvalidSegment",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DegenerateVector => "DegenerateVector",
            Error::EmptySet => "EmptySet",
            Error::Parse { .. } => "ParseError",
            Error::Schema(_) => "SchemaError",
            Error::Protocol(_) => "ProtocolError",
            Error::StreamMismatch(_) => "StreamMismatch",
            Error::Divergence { .. } => "DivergenceError",
            Error::ModelNotTrained => "ModelNotTrained",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
