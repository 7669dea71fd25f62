use std::path::PathBuf;

/// Errors raised by the detection pipelines and their file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt image stream: {0}")]
    CorruptStream(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown residual model: {0}")]
    UnknownModel(String),

    #[error("empty model selection")]
    EmptySelection,

    #[error("class {0} too small: {1} items, need at least {2}")]
    ClassTooSmall(String, usize, usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("malformed record in {file}: {detail}")]
    MalformedRecord { file: String, detail: String },

    #[error("model file error: {0}")]
    ModelFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
