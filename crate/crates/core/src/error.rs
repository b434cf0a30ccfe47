use std::io;

use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, counts or values that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),
    /// A local iteration or communication schedule that cannot be executed.
    #[error("schedule error: {0}")]
    Schedule(String),
    /// Device models that cannot be combined by the base station.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// Noise power cannot be calibrated for the requested operating point.
    #[error("calibration error: {0}")]
    Calibration(String),
    /// An exact enumeration that would exceed the hidden-pattern budget.
    #[error("enumeration of 2^{bits} hidden patterns exceeds the limit of 2^{limit}")]
    Enumeration { bits: usize, limit: usize },
    /// Malformed binary or text input.
    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: u64, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config<T>(message: impl Into<String>) -> Result<T> {
    Err(Error::Config(message.into()))
}
