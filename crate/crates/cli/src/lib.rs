//! Config-driven experiment runner on top of `smlab-core`.
//!
//! The binary parses a TOML [`config::ExperimentConfig`], runs one pipeline
//! from [`experiments`] inside a sized thread pool and writes
//! `report.json`, CSV tables and `manifest.json`.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{Command, ExperimentConfig};
pub use report::{execute, run, Report, RunError};
