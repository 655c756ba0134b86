use thiserror::Error;

#[derive(Debug, Error)]
pub enum VemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate cell {cell}: {reason}")]
    DegenerateCell { cell: usize, reason: String },
    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh validation failed: {0}")]
    Validation(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VemError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(VemError::InvalidArgument(msg.into()))
}
