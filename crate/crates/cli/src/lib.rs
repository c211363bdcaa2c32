//! Command-line workflows around `drpnn-core`: synthetic data, reduced-resolution
//! simulation, training, fusion, evaluation and filter-size sweeps.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{Profile, RunConfig};
pub use error::{CliError, Result};
