//! Configurable Monte Carlo harness: experiment configs, trial execution,
//! CSV output and SVG plots.

pub mod config;
pub mod output;
pub mod plot;
pub mod run;

pub use config::{parse_kv, DataModel, ExperimentConfig, ExperimentKind, Method};
pub use output::{summarize, write_outputs, SummaryRow};
pub use run::{run, TrialRecord, TrialResult};
