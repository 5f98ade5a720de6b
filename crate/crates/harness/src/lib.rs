//! Seeded Monte Carlo experiments and self-tests for the cross-pilot receiver.

pub mod config;
pub mod runner;
pub mod seed;
pub mod selftest;

pub use config::{ConfigError, ExperimentConfig};
pub use runner::{
    run, run_ber_vs_pdr, run_ber_vs_snr, run_papr_vs_ber, run_point, write_csv, Experiment, ResultRow, RunError,
};
