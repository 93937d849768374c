//! Batch runner for QSDC simulations: seeded sessions over parameter
//! sweeps, CSV/JSON results, per-session transcripts, and analytic tables.

pub mod config;
pub mod experiment;
pub mod table;

use thiserror::Error;

pub use config::{ExperimentConfig, Protocol, SweepSpec, SweepVariable};
pub use experiment::{run_experiment, write_artifacts, ExperimentResults, OutputFormat, ResultRow, RESULT_HEADER};
pub use table::{capacity_table, zero_crossing_km, CapacityRow, DberAssumption};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("session failure: {0}")]
    Session(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Session(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

/// Nine significant digits, locale-free.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}
