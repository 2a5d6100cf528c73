use thiserror::Error;

pub type Result<T> = std::result::Result<T, GwglError>;

#[derive(Debug, Error)]
pub enum GwglError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid group structure: {0}")]
    InvalidGroups(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Numerical failure: non-convergence, infeasibility, division by zero.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl GwglError {
    pub fn dim(msg: impl Into<String>) -> Self {
        GwglError::Dimension(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        GwglError::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        GwglError::Numerical(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        GwglError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from the numerics rather than the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, GwglError::Numerical(_))
    }
}
