use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Error, Debug)]
pub enum ClarError {
    #[error("SVD failed to converge for a {rows}x{cols} matrix")]
    SvdFailure { rows: usize, cols: usize },

    #[error("matrix is not symmetric positive definite ({rows}x{rows})")]
    NotSpd { rows: usize },

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver diverged at iteration {iter}: non-finite value in {variable}")]
    Divergence { iter: usize, variable: &'static str },

    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ClarError>;

impl ClarError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ClarError::InvalidParameter(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        ClarError::Io {
            path: path.into(),
            source,
        }
    }
}
