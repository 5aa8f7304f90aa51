use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("embedding has zero or non-finite norm")]
    DegenerateEmbedding,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("feature kind {0:?} is not registered with the encoder")]
    UnknownKind(String),

    #[error("frame time {got} is not after last written time {last}")]
    OutOfOrder { last: u64, got: u64 },

    #[error("start cell ({x}, {y}) is not traversable")]
    StartBlocked { x: i32, y: i32 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("replay diverged at line {line}: {detail}")]
    Divergence { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
