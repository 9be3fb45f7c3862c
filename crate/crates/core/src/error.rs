use thiserror::Error;

/// Errors produced by the solver toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The state left the finite range (or crossed the blow-up threshold).
    #[error("state diverged at step {step}")]
    Diverged { step: usize },

    #[error("all {samples} Monte-Carlo samples diverged")]
    AllSamplesDiverged { samples: usize },

    /// Parameters became non-finite during training; the last finite
    /// iterate is kept for diagnosis.
    #[error("parameters became non-finite at iteration {iteration}")]
    NonFiniteParameters { iteration: usize, snapshot: Vec<f64> },

    #[error("malformed data: {0}")]
    Format(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
