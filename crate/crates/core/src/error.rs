use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {layer}")]
    NonFinite { layer: String },
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn non_finite(layer: impl Into<String>) -> Self {
        Error::NonFinite { layer: layer.into() }
    }

    /// Configuration-class errors map to exit code 2 in the CLI.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Shape(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
