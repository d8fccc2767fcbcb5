//! Monte Carlo experiment runner for the one-bit Rao detector: false-alarm,
//! averaged false-alarm, detection, ROC and training-length studies written
//! as CSV files with SVG plots.

pub mod config;
pub mod experiments;
pub mod harness;
pub mod plot;

use std::path::PathBuf;

pub use config::{ConfigOverrides, ExperimentConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Data(String),
    #[error(transparent)]
    Numeric(#[from] onebit_core::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for bad configuration or input, 3 for numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Data(_) => 2,
            CliError::Numeric(onebit_core::Error::Io(_)) => 1,
            CliError::Numeric(_) => 3,
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Files written by one experiment run.
#[derive(Clone, Debug, Default)]
pub struct Written {
    pub csv: Vec<PathBuf>,
    pub svg: Vec<PathBuf>,
}
