use thiserror::Error;

use crate::compression::nicw::NicwError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Autodiff(#[from] nic_autodiff::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Nicw(#[from] NicwError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 config, 3 data, 4 numeric, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Nicw(_) | Error::Io(_) | Error::Csv(_) => 3,
            Error::Numeric(_) | Error::Autodiff(nic_autodiff::Error::NonFinite(_)) => 4,
            Error::Autodiff(nic_autodiff::Error::Format(_) | nic_autodiff::Error::Io(_)) => 3,
            Error::Autodiff(_) | Error::Invalid(_) => 1,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
