//! Experiment harness around `acsm-core`: configuration files, reference
//! generation, training cells and CSV output.

pub mod config;
pub mod files;
pub mod run;

pub use config::ExperimentConfig;
