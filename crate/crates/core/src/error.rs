use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on a scalar argument or configuration value was violated.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Two sample sets that must have equal size do not.
    #[error("size mismatch: {left} vs {right} points")]
    SizeMismatch { left: usize, right: usize },

    /// An oracle returned a non-finite value.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A chain iterate became non-finite or exceeded the divergence threshold.
    #[error("chain diverged at particle {particle}, step {step}")]
    Diverged { particle: usize, step: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
