//! Experiment driver for the counter constructions: configuration parsing,
//! run matrices, bound verification and replay.

pub mod config;
pub mod experiment;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{
    SamplingSummary,
    load_replay, prediction_table, replay, run_experiment, verify_bounds, Assertion, ReplayParams,
    RunOptions, RunRecord, Summary,
};
