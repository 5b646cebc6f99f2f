//! Seeded experiment harness for the sparse-recovery toolkit.

pub mod config;
pub mod experiment;
pub mod stream_io;
pub mod workload;

pub use config::{Distribution, ExperimentConfig, PlacementKind, Scheme};
pub use experiment::{run_experiment, Report, Summary, TrialRecord, CSV_HEADER, CSV_SCHEMA};
