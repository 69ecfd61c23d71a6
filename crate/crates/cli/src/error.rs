//! CLI-level errors, each mapped to a process exit code.

/// Exit codes: 0 success, 2 config error, 3 solver non-convergence (any
/// record), 4 I/O. Clap's own usage errors also exit with 2.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
