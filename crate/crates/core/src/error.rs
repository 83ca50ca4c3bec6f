use thiserror::Error;

pub type Result<T> = std::result::Result<T, SdgmError>;

#[derive(Debug, Error)]
pub enum SdgmError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("component index out of range: {0}")]
    Index(String),
    #[error("matrix factorization failed: {0}")]
    Factorization(String),
    #[error("unsupported conversion: {0}")]
    UnsupportedConversion(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid mixture spec: {0}")]
    Spec(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
