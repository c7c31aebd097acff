//! Experiment configuration, named runners and reporting.

pub mod config;
pub mod flow;
pub mod predicted;
pub mod report;
pub mod runner;

pub use config::{Experiment, ExperimentConfig};
pub use report::{RateReport, RunOutput};
pub use runner::run_experiment;
