//! Experiment harness: Monte Carlo error-rate studies, diffusion detection
//! and scalability timing, reported as CSV.

pub mod config;
pub mod report;
pub mod studies;
pub mod trials;

use thiserror::Error;

pub use config::{ExperimentGrid, GridConfig, Study, TestKind};
pub use report::{ErrorReport, ReportRow};
pub use studies::run_grid;
pub use trials::{NoiseMode, SyntheticCell, TestParams, TrialRecord};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),

    /// A rate was about to mix Null and Alternate trials.
    #[error("provenance violation: {0}")]
    Provenance(String),

    #[error(transparent)]
    Core(#[from] nird_core::NirdError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
