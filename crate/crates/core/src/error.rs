use std::io;

use thiserror::Error;

use crate::grid::GridDomain;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid dimensions {height}x{width}")]
    InvalidDimensions { height: usize, width: usize },

    #[error("expected {expected} values for the grid, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("domain mismatch: {left} vs {right}")]
    DomainMismatch { left: GridDomain, right: GridDomain },

    #[error("non-finite value {value} at pixel {index}")]
    NonFiniteValue { index: usize, value: f64 },

    #[error("value {value} at pixel {index} is outside [0, 1]")]
    OutOfUnitRange { index: usize, value: f64 },

    #[error("value {value} at pixel {index} is not binary")]
    NotBinary { index: usize, value: f64 },

    #[error("distance transform of an empty source set")]
    EmptySource,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("tape state: {0}")]
    TapeState(String),

    #[error("non-finite {what} from loss '{loss}' at epoch {epoch}")]
    NonFiniteLoss {
        loss: String,
        what: &'static str,
        epoch: usize,
    },

    #[error("generation failed after {attempts} attempts: {reason}")]
    Generation { attempts: usize, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
