use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] relnash_core::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot encode output: {0}")]
    Json(#[from] serde_json::Error),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
}

impl CliError {
    /// 1 validation, 2 solver failure, 3 verification FAIL.
    pub fn exit_code(&self) -> i32 {
        use relnash_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Json(_) => 1,
            CliError::Core(E::InvalidInput(_) | E::Capacity(_) | E::Unsupported(_) | E::Io(_) | E::Csv(_)) => 1,
            CliError::Core(E::Solver { .. } | E::Singular(_)) => 2,
            CliError::VerifyFailed(_) => 3,
        }
    }
}
