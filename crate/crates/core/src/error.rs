use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("element is not convex: {0}")]
    NonConvexElement(String),

    #[error("mass matrix is not positive definite ({context})")]
    DegenerateMassMatrix { context: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("incompatible Neumann data: residual {residual:e}")]
    Incompatible { residual: f64 },

    #[error("reference mismatch: {0}")]
    ReferenceMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
