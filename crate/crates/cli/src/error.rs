use thiserror::Error;

/// Failures that stop a command before it can judge its assertions.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] quasilattice_core::Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status; assertion failures use 1 and are not errors.
    pub fn exit_code(&self) -> i32 {
        2
    }
}
