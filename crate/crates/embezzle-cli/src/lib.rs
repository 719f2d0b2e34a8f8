//! Library side of the `embz` command-line tool: experiment configuration,
//! execution, caching, and artifact writing. The binary in `main.rs` is a
//! thin clap wrapper over [`runner::run_cli`].
//!
//! Exit-code contract (stable, scripts may rely on it):
//! - `2` — configuration rejected (unknown key, bad range, wrong experiment,
//!   empty results),
//! - `3` — numeric failure (truncation budget exceeded, invalid model
//!   parameter discovered at run time),
//! - `4` — I/O failure (unreadable config, unwritable output dir, lock held).

pub mod cache;
pub mod config;
pub mod experiments;
pub mod plot;
pub mod record;
pub mod runner;

use thiserror::Error;

/// Top-level CLI failure, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration: exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Numeric failure while computing: exit code 3.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Filesystem or lock failure: exit code 4.
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<embezzle::EmbezzleError> for CliError {
    fn from(e: embezzle::EmbezzleError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<embezzle::ModelError> for CliError {
    fn from(e: embezzle::ModelError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<embezzle::SpectrumError> for CliError {
    fn from(e: embezzle::SpectrumError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<embezzle::oracle::OracleError> for CliError {
    fn from(e: embezzle::oracle::OracleError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
