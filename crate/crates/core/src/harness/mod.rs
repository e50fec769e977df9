//! The experiment protocol: nominal training, library construction and
//! curation, fault adaptation with each method, and reporting.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{
    adapt, build_complement, post_fault_buffer, prune, train_nominal, AdaptOptions, AdaptOutcome, ComplementOutcome,
    Method, NOMINAL_ID, NOMINAL_VALUE_ID,
};
pub use config::{ExperimentConfig, FaultsConfig, RunsConfig};
pub use report::{report, report_csv, Report};
