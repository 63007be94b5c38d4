//! File formats, configuration and the command-line driver around
//! [`pdm_core`].
//!
//! The `pdm` binary runs five stages, each reading the previous stage's
//! output directory: `generate` (synthetic corpus), `extract` (hourly
//! features), `select` (feature ranking), `run` (double cross-validation of
//! every formulation and aggregation) and `report` (comparison tables and
//! indicator traces).

pub mod artifacts;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;

pub use config::ExperimentConfig;
pub use error::{ConfigError, DataError, Error};
