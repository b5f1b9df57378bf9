use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or unloadable input; exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// A run, a write or a validation failed; exit code 3.
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn field(field: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{field}: {msg}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 3,
        }
    }
}
