use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error(transparent)]
    Core(#[from] timing_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(String),
}

impl CliError {
    /// 2 for bad input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            _ => 1,
        }
    }
}
