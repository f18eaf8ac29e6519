//! Orchestration of the navicontrol pipeline: configuration, stages,
//! artifacts and the acceptance report.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use pipeline::{run_pipeline, Pipeline, Stage};
pub use report::{Check, Report};
