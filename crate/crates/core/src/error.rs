use thiserror::Error;

/// Errors raised by the training stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("trajectory set is empty")]
    EmptySet,
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("discount factor {0} is outside [0, 1)")]
    InvalidGamma(f64),
    #[error("non-finite gradient at parameter {index}: {value}")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("learning rates must satisfy l_r >= l_c >= l_a (got l_r={l_r}, l_c={l_c}, l_a={l_a})")]
    LearningRateOrder { l_r: f64, l_c: f64, l_a: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("malformed parameter file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { context, expected, got })
    }
}
