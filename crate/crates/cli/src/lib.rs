//! Experiment driver for the carbonate transition-path solver: config
//! loading, the ν sweep, composed time series, and file emission.

pub mod commands;
pub mod compose;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use config::{load_config, load_params, ExperimentConfig};
pub use error::{CliError, CliResult};
