use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("range error: value {value} exceeds the supremum of the function")]
    Range { value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("empty input")]
    EmptyInput,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid tower spec: {0}")]
    TowerSpec(String),

    #[error("unknown closed-form case `{0}`")]
    UnknownCase(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
