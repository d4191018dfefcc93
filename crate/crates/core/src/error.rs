use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdasError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("config error for key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AdasError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        AdasError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for failures caused by the data on disk rather than by how the
    /// caller configured the run.
    pub fn is_data_error(&self) -> bool {
        matches!(self, AdasError::Format(_) | AdasError::Io(_))
    }
}

pub type Result<T, E = AdasError> = std::result::Result<T, E>;
