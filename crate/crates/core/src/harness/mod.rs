//! Config ingestion, preset catalog, experiments and artifact output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod plot;
pub mod presets;

pub use crate::chain::Scenario;
pub use config::{load_scenario, ConfigDoc};
pub use experiment::{sweep, Experiment, SweepResult};
pub use output::{run_file, run_preset, RunReport};
