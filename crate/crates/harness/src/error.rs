use thiserror::Error;

/// Harness failures, split by CLI exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration, arguments or incompatible inputs (exit code 2).
    #[error("{0}")]
    Config(String),
    /// Anything that went wrong while running (exit code 3).
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}

impl From<d3rqn::Error> for HarnessError {
    fn from(e: d3rqn::Error) -> Self {
        if e.is_config() {
            HarnessError::Config(e.to_string())
        } else {
            HarnessError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Runtime(format!("i/o error: {e}"))
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Runtime(format!("csv error: {e}"))
    }
}

pub type HResult<T> = std::result::Result<T, HarnessError>;
