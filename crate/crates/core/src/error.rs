use thiserror::Error;

use crate::interval::Interval;

pub type Result<T, E = NspError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NspError {
    #[error("interval [{start}, {end}] is outside 1..={len}")]
    IndexBounds {
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "linear program did not converge on interval {interval} after {iterations} iterations"
    )]
    NumericalFailure {
        interval: Interval,
        iterations: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<NspError>,
    },

    #[error("i/o error")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl NspError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidArgument(msg.into())
    }

    /// True for errors caused by numerical trouble rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Self::NumericalFailure { .. } => true,
            Self::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> NspError {
    NspError::invalid(msg)
}
