//! Experiment harness: configuration, runs, sweeps, robustness checks and
//! plot tables.

pub mod config;
pub mod error;
pub mod plot;
pub mod robustness;
pub mod run;
pub mod sweep;

pub use config::{load_config, ExperimentConfig, Observation, Scale};
pub use error::{ConfigError, HarnessError};
pub use run::{run_experiment, MetricsRow, RunSummary};
