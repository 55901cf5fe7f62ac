use std::fmt::Display;

/// Errors surfaced by pipelines and the command line, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric failure: {0}")]
    Numeric(#[from] noisebound_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Display) -> Self {
        Error::Config(msg.to_string())
    }

    pub fn data(msg: impl Display) -> Self {
        Error::Data(msg.to_string())
    }

    /// 2 for configuration, 3 for data and IO, 4 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
