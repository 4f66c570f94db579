//! Command-line front end for the `wavefront` library.
//!
//! Exit codes are part of the interface; see [`exit`].

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use thiserror::Error;

/// Stable exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Invalid input, I/O failure or a numerical error.
    pub const ERROR: i32 = 1;
    /// The profile shot ended in a failed connection.
    pub const FAILED_CONNECTION: i32 = 2;
    /// Threshold bisection diagnostic: bracket or ordering could not be established.
    pub const BISECTION: i32 = 3;
    /// `verify` ran but at least one check failed.
    pub const CHECKS_FAILED: i32 = 4;
}

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Wave(#[from] wavefront::WaveError),
    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("plot error: {0}")]
    Plot(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("bisection diagnostic: {0}")]
    Bisection(String),
}

impl LabError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Bisection(_) | LabError::Wave(wavefront::WaveError::Bracket(_)) => exit::BISECTION,
            _ => exit::ERROR,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
