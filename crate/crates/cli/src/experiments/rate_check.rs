//! Empirical `min_t ‖∇f(x_t)‖²` on sample paths next to the theoretical
//! convergence curves.

use lbo_core::design::{error_bound_upper, MinimizerConfig};
use lbo_core::optimizer::{rate_reference, run_local_bo, RateKind, RateParams, RunTrace, StopReason};
use lbo_core::sampler::DEFAULT_FEATURES;
use lbo_core::stats::{loglog_slope, median};
use lbo_core::{draw_path, BatchSchedule, GpModel, KernelFamily, RunConfig, StepMode, TestFunction};
use serde::{Deserialize, Serialize};

use super::fig1::stop_name;
use super::{check_dims, check_positive, check_sigmas, path_smoothness, Context, KernelSpec, Outcome};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::Table;
use crate::seeds::{stream, trial_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateCheckConfig {
    pub kernel: KernelSpec,
    pub d: usize,
    pub trials: usize,
    pub features: usize,
    /// Iterations `T` of the noiseless runs.
    pub iterations: usize,
    pub noiseless_schedule: BatchSchedule,
    /// Noise levels of the noisy runs; empty skips them.
    pub noisy_sigmas: Vec<f64>,
    pub noisy_schedules: Vec<BatchSchedule>,
    /// Query budget of each noisy run.
    pub noisy_budget: usize,
    /// Spacing of the sample counts in the matched comparison.
    pub matched_step: usize,
    pub rkhs_norm: f64,
    pub delta: f64,
    pub grad_tol: f64,
    pub smoothness_samples: usize,
    pub smoothness_safety: f64,
    pub minimizer: MinimizerConfig,
}

impl Default for RateCheckConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig for RateCheckConfig {
    const SECTION: &'static str = "rate-check";

    fn desk() -> Self {
        Self {
            kernel: KernelSpec::unit(KernelFamily::Rbf),
            d: 5,
            trials: 20,
            features: DEFAULT_FEATURES,
            iterations: 100,
            noiseless_schedule: BatchSchedule::DPlusOne,
            noisy_sigmas: vec![0.05],
            noisy_schedules: vec![BatchSchedule::LinearDT, BatchSchedule::QuadraticDT2],
            noisy_budget: 1000,
            matched_step: 50,
            rkhs_norm: 1.0,
            delta: 0.1,
            grad_tol: 1e-6,
            smoothness_samples: 10_000,
            smoothness_safety: 1.5,
            minimizer: MinimizerConfig {
                n_random: 0,
                max_iters: 30,
                ..MinimizerConfig::default()
            },
        }
    }

    fn full() -> Self {
        Self {
            trials: 50,
            iterations: 200,
            noisy_sigmas: vec![0.05, 0.2],
            noisy_schedules: vec![BatchSchedule::DLogSqT, BatchSchedule::LinearDT, BatchSchedule::QuadraticDT2],
            noisy_budget: 5000,
            ..Self::desk()
        }
    }

    fn validate(&self) -> Result<(), String> {
        check_dims("d", &[self.d])?;
        if self.trials == 0 || self.iterations == 0 {
            return Err("trials and iterations must be at least 1".into());
        }
        if self.features == 0 || self.matched_step == 0 {
            return Err("features and matched_step must be at least 1".into());
        }
        if !self.noisy_sigmas.is_empty() {
            check_sigmas(&self.noisy_sigmas)?;
            if self.noisy_sigmas.contains(&0.0) {
                return Err("noisy_sigmas must be positive".into());
            }
            if self.noisy_schedules.is_empty() {
                return Err("noisy_schedules must not be empty".into());
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err("delta must lie in (0, 1)".into());
        }
        check_positive("rkhs_norm", self.rkhs_norm)?;
        check_positive("smoothness_safety", self.smoothness_safety)?;
        check_positive("grad_tol", self.grad_tol)
    }
}

pub const COLUMNS: [&str; 15] = [
    "sigma",
    "schedule",
    "trial",
    "t",
    "seed",
    "b",
    "n_cum",
    "grad_norm_sq",
    "running_min_grad_sq",
    "reference",
    "trace",
    "trace_bound",
    "lipschitz",
    "gap",
    "stop",
];
pub const MATCHED_COLUMNS: [&str; 5] = ["sigma", "schedule", "n", "trials", "median_running_min_grad_sq"];
pub const SLOPE_COLUMNS: [&str; 5] = ["sigma", "schedule", "runs", "empirical_slope", "reference_slope"];

struct Job {
    sigma: f64,
    schedule: BatchSchedule,
    trial: usize,
}

struct JobResult {
    seed: u64,
    lipschitz: f64,
    gap: f64,
    reference: Vec<f64>,
    trace: RunTrace,
}

pub fn run(cfg: &RateCheckConfig, ctx: &Context<'_>) -> Result<Outcome, CliError> {
    let mut jobs = Vec::new();
    for trial in 0..cfg.trials {
        jobs.push(Job {
            sigma: 0.0,
            schedule: cfg.noiseless_schedule,
            trial,
        });
        for &sigma in &cfg.noisy_sigmas {
            for &schedule in &cfg.noisy_schedules {
                jobs.push(Job { sigma, schedule, trial });
            }
        }
    }
    let results = ctx.map(&jobs, |j| run_job(cfg, ctx.seed, j));

    let kernel = cfg.kernel.build()?;
    let mut table = Table::new("rate_check", &COLUMNS, 4);
    let mut failures = Vec::new();
    let mut done = Vec::new();
    for (j, r) in jobs.iter().zip(results) {
        let r = r?;
        let tr = &r.trace;
        if tr.stop == StopReason::NumericalFailure {
            failures.push(format!(
                "rate-check sigma={} schedule={} trial={}: {}",
                j.sigma,
                j.schedule,
                j.trial,
                tr.error.clone().unwrap_or_default()
            ));
        }
        for ((rec, run_min), reference) in tr.records.iter().zip(tr.running_min_grad_sq()).zip(&r.reference) {
            table.push(vec![
                j.sigma.into(),
                j.schedule.to_string().into(),
                j.trial.into(),
                rec.t.into(),
                r.seed.into(),
                rec.b.into(),
                rec.n_cum.into(),
                rec.true_grad_norm.map(|g| g * g).into(),
                run_min.into(),
                (*reference).into(),
                rec.trace.into(),
                error_bound_upper(&kernel, cfg.d, j.sigma, rec.b).into(),
                r.lipschitz.into(),
                r.gap.into(),
                stop_name(tr.stop).into(),
            ]);
        }
        done.push((j, r));
    }

    let mut matched = Table::new("rate_matched", &MATCHED_COLUMNS, 3);
    let mut slopes = Table::new("rate_slopes", &SLOPE_COLUMNS, 2);
    let mut groups: Vec<(f64, BatchSchedule)> = Vec::new();
    for (j, _) in &done {
        if !groups.contains(&(j.sigma, j.schedule)) {
            groups.push((j.sigma, j.schedule));
        }
    }
    for (sigma, schedule) in groups {
        let runs: Vec<&JobResult> = done
            .iter()
            .filter(|(j, _)| j.sigma == sigma && j.schedule == schedule)
            .map(|(_, r)| r)
            .collect();
        let curves: Vec<Vec<f64>> = runs.iter().map(|r| r.trace.running_min_grad_sq()).collect();
        let refs: Vec<Vec<f64>> = runs.iter().map(|r| r.reference.clone()).collect();
        let (emp, refm) = (median_curve(&curves), median_curve(&refs));
        let ts: Vec<f64> = (1..=emp.len()).map(|t| t as f64).collect();
        slopes.push(vec![
            sigma.into(),
            schedule.to_string().into(),
            runs.len().into(),
            loglog_slope(&ts, &emp).into(),
            loglog_slope(&ts, &refm).into(),
        ]);
        if sigma > 0.0 {
            let mut n = cfg.matched_step;
            while n <= cfg.noisy_budget {
                let at: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| {
                        let mins = r.trace.running_min_grad_sq();
                        r.trace.records.iter().zip(mins).filter(|(rec, _)| rec.n_cum <= n).map(|(_, v)| v).last()
                    })
                    .filter(|v| v.is_finite())
                    .collect();
                matched.push(vec![
                    sigma.into(),
                    schedule.to_string().into(),
                    n.into(),
                    at.len().into(),
                    median(&at).into(),
                ]);
                n += cfg.matched_step;
            }
        }
    }
    Ok(Outcome {
        tables: vec![table, matched, slopes],
        failures,
    })
}

/// Pointwise median of curves, each extended by its last value to the
/// longest length. Runs that stop early on the gradient tolerance have
/// converged, so their running minimum stays put.
pub fn median_curve(curves: &[Vec<f64>]) -> Vec<f64> {
    let len = curves.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|t| {
            let col: Vec<f64> = curves
                .iter()
                .filter_map(|c| c.get(t).or(c.last()).copied())
                .collect();
            median(&col).unwrap_or(f64::NAN)
        })
        .collect()
}

fn run_job(cfg: &RateCheckConfig, base: u64, j: &Job) -> Result<JobResult, CliError> {
    let d = cfg.d;
    let seed = trial_seed(base, "rate-check", d, j.sigma, j.trial);
    let kernel = cfg.kernel.build()?;
    let func = TestFunction::path(draw_path(&kernel, d, cfg.features, stream(seed, "path"))?, j.sigma)?;
    let model = GpModel::new(kernel.clone(), j.sigma)?;
    let lip = path_smoothness(&func, &kernel, d, cfg.smoothness_samples, cfg.smoothness_safety, stream(seed, "smoothness"))?;
    let x1 = vec![0.0; d];
    let (budget, max_iters) = if j.sigma == 0.0 {
        let total = (1..=cfg.iterations).map(|t| j.schedule.batch(d, t)).sum();
        (total, cfg.iterations)
    } else {
        (cfg.noisy_budget, usize::MAX)
    };
    let mut rc = RunConfig::new(x1.clone(), lip, budget);
    rc.max_iters = max_iters;
    rc.mode = StepMode::GradientDescent;
    rc.schedule = j.schedule;
    rc.delta = cfg.delta;
    rc.seed = stream(seed, &format!("run-{}", j.schedule));
    rc.minimizer = cfg.minimizer.clone();
    rc.grad_tol = cfg.grad_tol;
    let trace = run_local_bo(&func, &model, &rc)?;

    // f* is unknown; the lowest value visited gives a valid telescoping gap.
    let f1 = func.value(&x1)?;
    let f_low = trace.records.iter().map(|r| r.f_true).fold(trace.f_final, f64::min);
    let gap = (f1 - f_low).max(0.0);
    let params = RateParams {
        kernel,
        d,
        sigma: j.sigma,
        lipschitz: lip,
        gap,
        rkhs_norm: cfg.rkhs_norm,
        delta: cfg.delta,
        schedule: j.schedule,
    };
    let kind = if j.sigma == 0.0 { RateKind::NoiselessRkhs } else { RateKind::NoisyGeneral };
    let reference = rate_reference(kind, &params, trace.records.len());
    Ok(JobResult {
        seed,
        lipschitz: lip,
        gap,
        reference,
        trace,
    })
}
