use shadowda_core::bench::BenchError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("stage failed: {0}")]
    Stage(String),
    #[error("leakage guard tripped: {0}")]
    Leakage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Stage(_) => 2,
            CliError::Leakage(_) => 3,
        }
    }

    pub fn stage(stage: &str, e: BenchError) -> Self {
        if e.is_leakage() {
            CliError::Leakage(format!("{stage}: {e}"))
        } else {
            CliError::Stage(format!("{stage}: {e}"))
        }
    }
}
