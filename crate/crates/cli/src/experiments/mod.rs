//! The experiments behind each subcommand.

pub mod bound_tables;
pub mod error_function;
pub mod fig1;
pub mod rate_check;
pub mod restarts;
pub mod subgradient;

use lbo_core::optimizer::{estimate_smoothness, smoothness_region};
use lbo_core::{KernelFamily, StationaryKernel, TestFunction};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::Table;

/// Isotropic kernel hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscale: f64,
    pub outputscale: f64,
}

impl KernelSpec {
    pub fn unit(family: KernelFamily) -> Self {
        Self {
            family,
            lengthscale: 1.0,
            outputscale: 1.0,
        }
    }

    pub fn build(&self) -> Result<StationaryKernel, CliError> {
        StationaryKernel::new(self.family, self.lengthscale, self.outputscale).map_err(|e| CliError::Config(format!("kernel: {e}")))
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::unit(KernelFamily::Rbf)
    }
}

/// What an experiment needs from the invocation.
pub struct Context<'a> {
    pub seed: u64,
    pub pool: &'a rayon::ThreadPool,
}

impl Context<'_> {
    /// Order-preserving parallel map.
    pub fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

/// Tables produced by one experiment plus the trials that failed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub failures: Vec<String>,
}

/// Smoothness constant of a sample path from a cube of half-width `2ℓ`
/// around the origin. Paths are stationary, so one region serves every
/// start.
pub fn path_smoothness(func: &TestFunction, kernel: &StationaryKernel, d: usize, samples: usize, safety: f64, seed: u64) -> Result<f64, CliError> {
    let region = smoothness_region(kernel, &vec![0.0; d], None);
    Ok(estimate_smoothness(func, &region, samples, safety, seed)?)
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {v}"))
    }
}

pub(crate) fn check_sigmas(sigmas: &[f64]) -> Result<(), String> {
    if sigmas.is_empty() {
        return Err("sigmas must not be empty".into());
    }
    match sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        Some(s) => Err(format!("noise levels must be nonnegative, got {s}")),
        None => Ok(()),
    }
}

pub(crate) fn check_dims(name: &str, dims: &[usize]) -> Result<(), String> {
    if dims.is_empty() {
        return Err(format!("{name} must not be empty"));
    }
    if dims.contains(&0) {
        return Err(format!("all entries of {name} must be at least 1"));
    }
    Ok(())
}
