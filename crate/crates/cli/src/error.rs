use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation error: {0}")]
    Simulation(#[from] fk_eit::Error),

    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("{failed} acceptance criteria failed")]
    AcceptanceFailed { failed: usize },
}

impl CliError {
    /// 1 for configuration problems, 2 for simulation and output failures,
    /// 3 for a failed acceptance run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Simulation(_) | CliError::Io { .. } => 2,
            CliError::AcceptanceFailed { .. } => 3,
        }
    }
}
