//! Experiment harness for `fsi-core`: run configuration, CSV reports,
//! a disk cache for reference solutions and parallel parameter sweeps.

pub mod cache;
pub mod config;
pub mod report;
pub mod runner;

pub use config::{parse_sweep, RunConfig};
pub use runner::{bench, run, RunReport};

/// Errors raised by the harness.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("solver error: {0}")]
    Core(#[from] fsi_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: std::path::PathBuf,
        source: csv::Error,
    },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
