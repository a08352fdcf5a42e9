use thiserror::Error;

/// Errors raised by network construction, sampling and the closed forms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum UiError {
    #[error("mode index {index} out of range for {mode_count} modes")]
    IndexOutOfRange { index: usize, mode_count: usize },

    #[error("beam splitter needs two distinct modes, got ({0}, {0})")]
    RepeatedMode(usize),

    #[error("transmittivity {0} outside [0, 1]")]
    InvalidTransmittivity(f64),

    #[error("invalid copy count: {0}")]
    InvalidCopyCount(String),

    #[error("shot/round count must be at least 1, got {0}")]
    InvalidShotCount(u64),

    #[error("total resource count must be at least 3, got {0}")]
    InvalidTotal(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl UiError {
    pub fn domain(msg: impl Into<String>) -> Self {
        UiError::Domain(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        UiError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Stable machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            UiError::IndexOutOfRange { .. } => "IndexOutOfRange",
            UiError::RepeatedMode(_) => "RepeatedMode",
            UiError::InvalidTransmittivity(_) => "InvalidTransmittivity",
            UiError::InvalidCopyCount(_) => "InvalidCopyCount",
            UiError::InvalidShotCount(_) => "InvalidShotCount",
            UiError::InvalidTotal(_) => "InvalidTotal",
            UiError::Domain(_) => "DomainError",
            UiError::Config { .. } => "ConfigError",
            UiError::Io(_) => "IoError",
        }
    }
}

pub type UiResult<T> = Result<T, UiError>;
