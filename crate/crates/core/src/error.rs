use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("frequency range too small: {0}")]
    Nyquist(String),
    #[error("representation mismatch: {0}")]
    Rep(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed snapshot: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
