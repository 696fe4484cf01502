//! Local solutions on GP sample paths versus global baselines.

use lbo_core::baselines::{equivalent_grid_size, run_gp_ucb, run_random_search, UcbConfig};
use lbo_core::design::{error_bound_upper, MinimizerConfig};
use lbo_core::optimizer::{run_local_bo, StopReason};
use lbo_core::sampler::DEFAULT_FEATURES;
use lbo_core::stats::{median, quantile};
use lbo_core::{draw_path, BatchSchedule, BoxDomain, GpModel, KernelFamily, RunConfig, StepMode, TestFunction};
use serde::{Deserialize, Serialize};

use super::{check_dims, check_positive, check_sigmas, path_smoothness, Context, KernelSpec, Outcome};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{Cell, Table};
use crate::seeds::{stream, trial_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig1Config {
    pub dims: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub trials: usize,
    /// Query budget per run, shared by every method.
    pub budget: usize,
    pub kernel: KernelSpec,
    /// Random features per sample path.
    pub features: usize,
    /// The search box is `[-r·√d, r·√d]^d` with `r = box_scale`.
    pub box_scale: f64,
    pub schedule: BatchSchedule,
    pub noiseless_mode: StepMode,
    pub noisy_mode: StepMode,
    pub grad_tol: f64,
    pub max_iters: Option<usize>,
    pub smoothness_samples: usize,
    pub smoothness_safety: f64,
    pub minimizer: MinimizerConfig,
    /// Run GP-UCB and random search next to local BO.
    pub baselines: bool,
    /// Dimensions that get baseline runs; all of `dims` when absent.
    pub baseline_dims: Option<Vec<usize>>,
    pub ucb: UcbConfig,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig for Fig1Config {
    const SECTION: &'static str = "fig1";

    fn desk() -> Self {
        Self {
            dims: vec![1, 5, 10, 20],
            sigmas: vec![0.0, 0.05, 0.2],
            trials: 10,
            budget: 1000,
            kernel: KernelSpec::unit(KernelFamily::Rbf),
            features: DEFAULT_FEATURES,
            box_scale: 5.0,
            schedule: BatchSchedule::DPlusOne,
            noiseless_mode: StepMode::BfgsHandoff,
            noisy_mode: StepMode::GradientDescent,
            grad_tol: 1e-6,
            max_iters: None,
            smoothness_samples: 2000,
            smoothness_safety: 1.5,
            minimizer: MinimizerConfig {
                n_random: 0,
                max_iters: 30,
                ..MinimizerConfig::default()
            },
            baselines: true,
            baseline_dims: None,
            ucb: UcbConfig {
                inner_iters: 10,
                ..UcbConfig::default()
            },
        }
    }

    fn full() -> Self {
        Self {
            dims: vec![1, 5, 10, 20, 30, 50],
            trials: 50,
            budget: 5000,
            ..Self::desk()
        }
    }

    fn validate(&self) -> Result<(), String> {
        check_dims("dims", &self.dims)?;
        check_sigmas(&self.sigmas)?;
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if self.budget == 0 {
            return Err("budget must be at least 1".into());
        }
        if self.features == 0 {
            return Err("features must be at least 1".into());
        }
        check_positive("box_scale", self.box_scale)?;
        check_positive("smoothness_safety", self.smoothness_safety)?;
        check_positive("grad_tol", self.grad_tol)?;
        if let Some(bd) = &self.baseline_dims {
            if let Some(d) = bd.iter().find(|d| !self.dims.contains(d)) {
                return Err(format!("baseline_dims entry {d} is not in dims"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    LocalBo,
    RandomSearch,
    GpUcb,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::LocalBo => "local-bo",
            Method::RandomSearch => "random-search",
            Method::GpUcb => "gp-ucb",
        }
    }
}

struct Job {
    method: Method,
    d: usize,
    sigma: f64,
    trial: usize,
}

struct JobResult {
    row: Vec<Cell>,
    iterations: Vec<Vec<Cell>>,
    failure: Option<String>,
}

pub const MAIN_COLUMNS: [&str; 10] = [
    "method",
    "d",
    "sigma",
    "trial",
    "seed",
    "final_value",
    "log10_grid_size",
    "queries",
    "iterations",
    "stop",
];

pub const ITERATION_COLUMNS: [&str; 13] = [
    "d",
    "sigma",
    "trial",
    "t",
    "b",
    "n_cum",
    "line_search",
    "eta",
    "f_true",
    "est_grad_norm",
    "true_grad_norm",
    "trace",
    "trace_bound",
];

pub const SUMMARY_COLUMNS: [&str; 8] = ["method", "d", "sigma", "runs", "median", "q05", "q95", "log10_grid_size_median"];

pub fn run(cfg: &Fig1Config, ctx: &Context<'_>) -> Result<Outcome, CliError> {
    let mut jobs = Vec::new();
    for &d in &cfg.dims {
        let with_baselines = cfg.baselines && cfg.baseline_dims.as_ref().is_none_or(|b| b.contains(&d));
        for &sigma in &cfg.sigmas {
            for trial in 0..cfg.trials {
                jobs.push(Job { method: Method::LocalBo, d, sigma, trial });
                if with_baselines {
                    jobs.push(Job { method: Method::RandomSearch, d, sigma, trial });
                    jobs.push(Job { method: Method::GpUcb, d, sigma, trial });
                }
            }
        }
    }
    let results = ctx.map(&jobs, |job| run_job(cfg, ctx.seed, job));

    let mut main = Table::new("fig1", &MAIN_COLUMNS, 4);
    let mut iters = Table::new("fig1_iterations", &ITERATION_COLUMNS, 4);
    let mut failures = Vec::new();
    for r in results {
        let r = r?;
        main.push(r.row);
        for row in r.iterations {
            iters.push(row);
        }
        failures.extend(r.failure);
    }
    main.sort();
    let summary = summarize(&main, cfg.kernel.outputscale.sqrt());
    Ok(Outcome {
        tables: vec![main, iters, summary],
        failures,
    })
}

fn run_job(cfg: &Fig1Config, base: u64, job: &Job) -> Result<JobResult, CliError> {
    let Job { method, d, sigma, trial } = *job;
    let seed = trial_seed(base, "fig1", d, sigma, trial);
    let kernel = cfg.kernel.build()?;
    let path = draw_path(&kernel, d, cfg.features, stream(seed, "path"))?;
    let func = TestFunction::path(path, sigma)?;
    let model = GpModel::new(kernel.clone(), sigma)?;
    let domain = BoxDomain::cube(d, cfg.box_scale * (d as f64).sqrt());
    let sd = cfg.kernel.outputscale.sqrt();
    let label = format!("{} d={d} sigma={sigma} trial={trial}", method.name());

    let (final_value, queries, iterations, stop, failure, iter_rows) = match method {
        Method::LocalBo => {
            let lip = path_smoothness(&func, &kernel, d, cfg.smoothness_samples, cfg.smoothness_safety, stream(seed, "smoothness"))?;
            let mut rc = RunConfig::new(vec![0.0; d], lip, cfg.budget);
            rc.domain = Some(domain);
            rc.mode = if sigma == 0.0 { cfg.noiseless_mode } else { cfg.noisy_mode };
            rc.schedule = cfg.schedule;
            rc.seed = stream(seed, "run");
            rc.minimizer = cfg.minimizer.clone();
            rc.grad_tol = cfg.grad_tol;
            if let Some(m) = cfg.max_iters {
                rc.max_iters = m;
            }
            let tr = run_local_bo(&func, &model, &rc)?;
            let rows = tr
                .records
                .iter()
                .map(|r| {
                    vec![
                        d.into(),
                        sigma.into(),
                        trial.into(),
                        r.t.into(),
                        r.b.into(),
                        r.n_cum.into(),
                        r.line_search.into(),
                        r.eta.into(),
                        r.f_true.into(),
                        r.est_grad.iter().map(|g| g * g).sum::<f64>().sqrt().into(),
                        r.true_grad_norm.into(),
                        r.trace.into(),
                        error_bound_upper(&kernel, d, sigma, r.b).into(),
                    ]
                })
                .collect();
            let failure = (tr.stop == StopReason::NumericalFailure)
                .then(|| format!("{label}: {}", tr.error.clone().unwrap_or_default()));
            (tr.f_final, tr.n_total, tr.records.len(), stop_name(tr.stop), failure, rows)
        }
        Method::RandomSearch => {
            let tr = run_random_search(&func, cfg.budget, &domain, stream(seed, "random-search"))?;
            (tr.f_best, tr.best_so_far.len(), tr.best_so_far.len(), "budget", None, Vec::new())
        }
        Method::GpUcb => {
            let tr = run_gp_ucb(&func, &model, cfg.budget, &domain, &cfg.ucb, stream(seed, "gp-ucb"))?;
            let failure = tr.error.as_ref().map(|e| format!("{label}: {e}"));
            let stop = if failure.is_some() { "numerical-failure" } else { "budget" };
            (tr.f_best, tr.best_so_far.len(), tr.best_so_far.len(), stop, failure, Vec::new())
        }
    };
    let row = vec![
        method.name().into(),
        d.into(),
        sigma.into(),
        trial.into(),
        seed.into(),
        final_value.into(),
        equivalent_grid_size(final_value, sd).1.into(),
        queries.into(),
        iterations.into(),
        stop.into(),
    ];
    Ok(JobResult {
        row,
        iterations: iter_rows,
        failure,
    })
}

pub(crate) fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::MaxIters => "max-iters",
        StopReason::Budget => "budget",
        StopReason::GradTol => "grad-tol",
        StopReason::NumericalFailure => "numerical-failure",
    }
}

/// Per-(method, d, σ) quantiles of the final values. Expects `main` sorted.
fn summarize(main: &Table, sd: f64) -> Table {
    let mut out = Table::new("fig1_summary", &SUMMARY_COLUMNS, 3);
    let mut i = 0;
    while i < main.rows.len() {
        let key = &main.rows[i][..3];
        let mut j = i;
        let mut vals = Vec::new();
        while j < main.rows.len() && main.rows[j][..3] == *key {
            if let Cell::Float(v) = main.rows[j][5] {
                vals.push(v);
            }
            j += 1;
        }
        let med = median(&vals).unwrap_or(f64::NAN);
        let mut row = key.to_vec();
        row.extend([
            vals.len().into(),
            med.into(),
            quantile(&vals, 0.05).unwrap_or(f64::NAN).into(),
            quantile(&vals, 0.95).unwrap_or(f64::NAN).into(),
            equivalent_grid_size(med, sd).1.into(),
        ]);
        out.push(row);
        i = j;
    }
    out
}
