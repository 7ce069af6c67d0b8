//! Experiment plumbing behind the command-line tool: settings, dataset
//! generation, training, evaluation, the MUSIC baseline and reports.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod pool;
pub mod settings;

pub use config::{DatasetConfig, EvalConfig, ExperimentConfig};
pub use settings::{preset_names, Settings};
