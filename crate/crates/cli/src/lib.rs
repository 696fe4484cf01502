//! Experiment runner for `lbo-core`.
//!
//! Every subcommand is a pure function of its configuration and base seed:
//! trials fan out over a thread pool, results are sorted by a deterministic
//! key, and each run writes CSV tables plus a `manifest.json`.

pub mod app;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod seeds;

pub use app::{execute, Cli, Command, RunSummary};
pub use error::CliError;
