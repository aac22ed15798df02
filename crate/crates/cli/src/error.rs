use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid configuration, or bad command-line usage.
    #[error("config error {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A numeric or hypothesis failure; artifacts describing it have been
    /// written where possible.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) | CliError::Usage(_) | CliError::Io { .. } => 2,
        }
    }
}
