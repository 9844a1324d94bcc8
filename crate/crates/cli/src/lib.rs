//! Config-driven experiment runner.
//!
//! A run directory holds `config.toml`, `dataset.csv`, `network.txt`,
//! `training.json`, `trace/` (one CSV per layer plus `manifest.json`),
//! `analysis/` (moves, separation, components, Isomap projections),
//! `report.json` and `metadata.json`. Only `metadata.json` carries wall-clock
//! data; everything else is a deterministic function of the config.

pub mod config;
pub mod pipeline;

pub use config::{ConfigError, ExperimentConfig};
pub use pipeline::{run, run_stage, CliError, CliResult, RunReport, Stage};
