use thiserror::Error;

/// Failures surfaced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("argument {value} outside the tabulated range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    /// The true value exceeds f64; `log_value` carries its natural logarithm.
    #[error("overflow: natural log of the result is {log_value}")]
    Overflow { log_value: f64, partial: bool },

    #[error("non-finite value {value} encountered at {at}")]
    Evaluation { at: f64, value: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("no sign change found for {0}")]
    NoBracket(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
