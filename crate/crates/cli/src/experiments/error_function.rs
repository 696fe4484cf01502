//! Empirical error function against its analytic bound, swept over the
//! batch size at a fixed dimension and over the dimension at a fixed batch.

use lbo_core::design::{bound_matern_batch, error_bound_upper, error_function_design, MinimizerConfig};
use lbo_core::stats::loglog_slope;
use lbo_core::{KernelFamily, Lengthscale, Provenance, StationaryKernel};
use serde::{Deserialize, Serialize};

use super::{check_dims, check_sigmas, Context, KernelSpec, Outcome};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{Cell, Table};
use crate::seeds::trial_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorFunctionConfig {
    pub kernel: KernelSpec,
    pub sigmas: Vec<f64>,
    /// Dimension of the batch sweep.
    pub dim: usize,
    pub batches: Vec<usize>,
    /// Batch size of the dimension sweep.
    pub batch: usize,
    pub dims: Vec<usize>,
    pub minimizer: MinimizerConfig,
}

impl Default for ErrorFunctionConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig for ErrorFunctionConfig {
    const SECTION: &'static str = "error-function";

    fn desk() -> Self {
        Self {
            kernel: KernelSpec::unit(KernelFamily::Matern25),
            sigmas: vec![0.2],
            dim: 10,
            batches: vec![20, 50, 100, 200, 500],
            batch: 500,
            dims: vec![2, 5, 10, 20],
            minimizer: MinimizerConfig {
                n_random: 0,
                max_iters: 30,
                ..MinimizerConfig::default()
            },
        }
    }

    fn full() -> Self {
        Self {
            sigmas: vec![0.05, 0.2, 1.0],
            batches: vec![20, 50, 100, 200, 500, 1000],
            dims: vec![2, 5, 10, 20, 30],
            minimizer: MinimizerConfig {
                n_random: 2,
                max_iters: 100,
                ..MinimizerConfig::default()
            },
            ..Self::desk()
        }
    }

    fn validate(&self) -> Result<(), String> {
        check_sigmas(&self.sigmas)?;
        check_dims("dims", &self.dims)?;
        check_dims("dim", &[self.dim])?;
        if self.batches.is_empty() || self.batches.contains(&0) || self.batch == 0 {
            return Err("batch sizes must be at least 1".into());
        }
        Ok(())
    }
}

pub const COLUMNS: [&str; 8] = ["sweep", "sigma", "d", "b", "empirical", "bound", "within_bound", "provenance"];
pub const SLOPE_COLUMNS: [&str; 5] = ["sweep", "sigma", "points", "empirical_slope", "bound_slope"];

/// The analytic bound on the error function. For the Matérn-5/2 kernel this
/// is the batch-size form with its leading constant `15√2/2`, rescaled from
/// unit hyperparameters; otherwise the per-axis differencing bound.
pub fn analytic_bound(kernel: &StationaryKernel, d: usize, sigma: f64, b: usize) -> f64 {
    match (kernel.family(), kernel.lengthscale()) {
        (KernelFamily::Matern25, Lengthscale::Isotropic(l)) => {
            let s = kernel.outputscale();
            s / (l * l) * bound_matern_batch(d, b, sigma / s.sqrt())
        }
        _ => error_bound_upper(kernel, d, sigma, b),
    }
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::Optimized => "optimized",
        Provenance::Central { .. } | Provenance::CentralAllocated { .. } => "central",
        Provenance::Forward { .. } | Provenance::ForwardAllocated { .. } => "forward",
        Provenance::Random => "random",
    }
}

struct Job {
    sweep: &'static str,
    sigma: f64,
    d: usize,
    b: usize,
}

pub fn run(cfg: &ErrorFunctionConfig, ctx: &Context<'_>) -> Result<Outcome, CliError> {
    let kernel = cfg.kernel.build()?;
    let mut jobs = Vec::new();
    for &sigma in &cfg.sigmas {
        for &b in &cfg.batches {
            jobs.push(Job { sweep: "batch", sigma, d: cfg.dim, b });
        }
        for &d in &cfg.dims {
            jobs.push(Job { sweep: "dim", sigma, d, b: cfg.batch });
        }
    }
    let results = ctx.map(&jobs, |j| {
        let mut mcfg = cfg.minimizer.clone();
        mcfg.seed = trial_seed(ctx.seed, "error-function", j.d, j.sigma, j.b);
        error_function_design(&kernel, j.d, j.sigma, j.b, &mcfg)
    });

    let mut table = Table::new("error_function", &COLUMNS, 4);
    let mut slopes = Table::new("error_function_slopes", &SLOPE_COLUMNS, 2);
    for (j, r) in jobs.iter().zip(results) {
        let r = r?;
        let bound = analytic_bound(&kernel, j.d, j.sigma, j.b);
        table.push(vec![
            j.sweep.into(),
            j.sigma.into(),
            j.d.into(),
            j.b.into(),
            r.value.into(),
            bound.into(),
            (r.value <= bound).into(),
            provenance_name(r.design.provenance()).into(),
        ]);
    }
    for &sigma in &cfg.sigmas {
        for (sweep, xcol) in [("batch", 3), ("dim", 2)] {
            let rows: Vec<&Vec<Cell>> = table
                .rows
                .iter()
                .filter(|r| r[0] == Cell::from(sweep) && r[1] == Cell::Float(sigma))
                .collect();
            let col = |c: usize| -> Vec<f64> {
                rows.iter()
                    .map(|r| match r[c] {
                        Cell::Float(v) => v,
                        Cell::Int(v) => v as f64,
                        _ => f64::NAN,
                    })
                    .collect()
            };
            let xs = col(xcol);
            slopes.push(vec![
                sweep.into(),
                sigma.into(),
                rows.len().into(),
                loglog_slope(&xs, &col(4)).into(),
                loglog_slope(&xs, &col(5)).into(),
            ]);
        }
    }
    Ok(Outcome {
        tables: vec![table, slopes],
        failures: Vec::new(),
    })
}
