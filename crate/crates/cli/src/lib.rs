//! Library side of the `unlearn` command: argument handling, experiment
//! runners and output writers.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod svg;
pub mod table;

pub use commands::run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration (exit code 2).
    #[error("{0}")]
    Usage(String),
    /// Failure while running (exit code 1).
    #[error("{0}")]
    Runtime(String),
}

impl From<unlearn_core::Error> for CliError {
    fn from(e: unlearn_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}
