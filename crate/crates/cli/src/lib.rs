//! Front end for `tomoforge`: config-driven sweeps, built-in invariant
//! checks and plot-ready CSV export. The binary in `main.rs` is a thin clap
//! wrapper over [`commands`].

pub mod commands;
pub mod csvio;
pub mod manifest;
pub mod verify;

use std::path::{Path, PathBuf};

use thiserror::Error;

/// Environment variable that overrides `root_seed` of a run config.
pub const SEED_ENV: &str = "TOMOFORGE_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("unknown metric '{0}'")]
    UnknownMetric(String),

    #[error("{path}: {msg}")]
    Schema { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0} invariant check(s) failed")]
    Verify(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Config(_) | CliError::UnknownMetric(_) | CliError::Schema { .. } => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
