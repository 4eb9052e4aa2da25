//! Command implementations behind the `baker-copula` binary.
//!
//! Everything is exposed as a library so the commands can be driven directly
//! from integration tests without spawning processes.

pub mod commands;
pub mod dataset;
pub mod gaussian;
pub mod model;
pub mod workers;

use thiserror::Error;

/// Command failures, each mapped to a stable process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Exit 2: unreadable input, malformed CSV, bad flags, bad model files.
    #[error("input error: {0}")]
    Input(String),
    /// Exit 3: the fit ran out of iterations (outputs are still written).
    #[error("did not converge: {0}")]
    NonConvergence(String),
    /// Exit 4: the fitted model is degenerate (H± with n = 1).
    #[error("degenerate model: {0}")]
    Degenerate(String),
    /// Exit 5: the operation is not defined for this dimensionality.
    #[error("unsupported dimensionality: {0}")]
    Dimensionality(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Degenerate(_) => 4,
            CliError::Dimensionality(_) => 5,
        }
    }

    pub fn input(err: impl std::fmt::Display) -> Self {
        CliError::Input(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
