use thiserror::Error;

/// Errors produced by the ensemble, design and optimization layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The candidate structure or coefficients cannot produce a valid ensemble.
    /// Optimizers score such candidates as `-inf` instead of propagating.
    #[error("infeasible structure: {0}")]
    Infeasible(String),

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
