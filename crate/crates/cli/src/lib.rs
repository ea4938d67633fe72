//! Experiment drivers for the `posdesign` command-line tool: scenario
//! ingestion, sweeps over the clock-bias prior, LOS illumination metrics and
//! CSV output.

pub mod analysis;
pub mod experiments;
pub mod metrics;
pub mod output;
pub mod scenario;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] posdesign::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

pub use experiments::{Experiment, RunConfig, RunOutput, Sweep};
pub use output::SweepRecord;
pub use scenario::{Preset, ScenarioFile};
