use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid road network: {0}")]
    InvalidNetwork(String),
    #[error("ray from outside corridor")]
    RayOutsideCorridor,
    #[error("xml parse error at line {line}: {message}")]
    Xml { line: usize, message: String },
    #[error("way {way}: missing node {node}")]
    MissingNode { way: i64, node: i64 },
    #[error("no drivable roads")]
    NoDrivableRoads,
    #[error("expected input of length {expected}, got {actual}")]
    InputLength { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("navigator invariant violated: {0}")]
    Navigator(&'static str),
    #[error("replay buffer holds {len} tuples, cannot sample {batch}")]
    BufferTooSmall { len: usize, batch: usize },
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
