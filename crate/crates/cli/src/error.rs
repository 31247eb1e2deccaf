use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent problem file or flags.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] varexp::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 1 for numerical or hypothesis failures, 2 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(varexp::Error::Numerical(_) | varexp::Error::Hypotheses(_)) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
