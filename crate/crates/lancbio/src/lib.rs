//! File formats, experiment configs, the grid runner and summaries built
//! on `lancbio-core`.

pub mod config;
pub mod data;
pub mod experiment;
pub mod idx;
pub mod summary;
pub mod trace;

pub use config::{load_experiment, parse_experiment, ConfigError, ProblemConfig, RunConfig};
pub use experiment::{build_instance, run_cell, run_experiment, Instance, RunError};
pub use summary::{summarize, SummaryError};
