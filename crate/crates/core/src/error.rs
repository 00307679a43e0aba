use thiserror::Error;

/// Errors raised by measure evaluation, enumeration and prior construction.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("symbol {symbol} is outside the alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("conditional is undefined: the prefix has zero probability")]
    UndefinedConditional,

    #[error("horizon {n} needs {states} strings, over the enumeration budget of {budget}")]
    BudgetExceeded { n: usize, states: u128, budget: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("inconsistent artifacts: {0}")]
    Inconsistent(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::InvalidInput(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
