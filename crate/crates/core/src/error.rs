use thiserror::Error;

/// Errors raised by state algebra, optical elements and protocol drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed mode register (duplicate or empty labels).
    #[error("configuration error: {0}")]
    Config(String),
    /// A mode is missing from the register, or two registers disagree.
    #[error("register error: {0}")]
    Register(String),
    /// A numeric parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// An input violates an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;
