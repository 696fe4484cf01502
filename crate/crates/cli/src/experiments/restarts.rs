//! Repeated local runs from random starts on the same sample path.

use lbo_core::design::MinimizerConfig;
use lbo_core::optimizer::{run_local_bo, StopReason};
use lbo_core::sampler::DEFAULT_FEATURES;
use lbo_core::stats::{median, quantile};
use lbo_core::{draw_path, BatchSchedule, BoxDomain, GpModel, KernelFamily, RunConfig, StepMode, TestFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fig1::stop_name;
use super::{check_dims, check_positive, check_sigmas, path_smoothness, Context, KernelSpec, Outcome};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{Cell, Table};
use crate::seeds::{stream, trial_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestartsConfig {
    pub kernel: KernelSpec,
    pub d: usize,
    pub sigma: f64,
    /// Number of sample paths.
    pub paths: usize,
    /// Restarts per path.
    pub restarts: usize,
    /// Query budget of one restart.
    pub budget: usize,
    pub features: usize,
    /// Starts are uniform in `[-r·√d, r·√d]^d`, which also bounds the runs.
    pub box_scale: f64,
    pub schedule: BatchSchedule,
    pub noiseless_mode: StepMode,
    pub noisy_mode: StepMode,
    pub grad_tol: f64,
    pub smoothness_samples: usize,
    pub smoothness_safety: f64,
    pub minimizer: MinimizerConfig,
    /// `[from, to]` restart counts whose best-value gain is reported per path.
    pub gain_windows: Vec<[usize; 2]>,
}

impl Default for RestartsConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig for RestartsConfig {
    const SECTION: &'static str = "restarts";

    fn desk() -> Self {
        Self {
            kernel: KernelSpec::unit(KernelFamily::Rbf),
            d: 5,
            sigma: 0.0,
            paths: 10,
            restarts: 100,
            budget: 300,
            features: DEFAULT_FEATURES,
            box_scale: 5.0,
            schedule: BatchSchedule::DPlusOne,
            noiseless_mode: StepMode::BfgsHandoff,
            noisy_mode: StepMode::GradientDescent,
            grad_tol: 1e-6,
            smoothness_samples: 2000,
            smoothness_safety: 1.5,
            minimizer: MinimizerConfig {
                n_random: 0,
                max_iters: 30,
                ..MinimizerConfig::default()
            },
            gain_windows: vec![[1, 20], [50, 100]],
        }
    }

    fn full() -> Self {
        Self {
            d: 20,
            paths: 20,
            restarts: 200,
            budget: 2000,
            ..Self::desk()
        }
    }

    fn validate(&self) -> Result<(), String> {
        check_dims("d", &[self.d])?;
        check_sigmas(&[self.sigma])?;
        if self.paths == 0 || self.restarts == 0 || self.budget == 0 || self.features == 0 {
            return Err("paths, restarts, budget and features must be at least 1".into());
        }
        check_positive("box_scale", self.box_scale)?;
        check_positive("smoothness_safety", self.smoothness_safety)?;
        check_positive("grad_tol", self.grad_tol)?;
        for [a, b] in &self.gain_windows {
            if !(1 <= *a && a < b) {
                return Err(format!("gain window [{a}, {b}] must satisfy 1 ≤ from < to"));
            }
        }
        Ok(())
    }
}

pub const COLUMNS: [&str; 7] = ["path", "restart", "seed", "final_value", "best_so_far", "queries", "stop"];
pub const SUMMARY_COLUMNS: [&str; 5] = ["restart", "paths", "median_best", "q05_best", "q95_best"];
pub const GAIN_COLUMNS: [&str; 4] = ["path", "from", "to", "gain"];

pub fn run(cfg: &RestartsConfig, ctx: &Context<'_>) -> Result<Outcome, CliError> {
    let kernel = cfg.kernel.build()?;
    let d = cfg.d;
    let path_seeds: Vec<u64> = (0..cfg.paths).map(|p| trial_seed(ctx.seed, "restarts", d, cfg.sigma, p)).collect();
    let lips = ctx.map(&path_seeds, |&seed| -> Result<f64, CliError> {
        let func = TestFunction::path(draw_path(&kernel, d, cfg.features, stream(seed, "path"))?, cfg.sigma)?;
        path_smoothness(&func, &kernel, d, cfg.smoothness_samples, cfg.smoothness_safety, stream(seed, "smoothness"))
    });
    let lips = lips.into_iter().collect::<Result<Vec<f64>, CliError>>()?;

    let jobs: Vec<(usize, usize)> = (0..cfg.paths).flat_map(|p| (1..=cfg.restarts).map(move |r| (p, r))).collect();
    let domain = BoxDomain::cube(d, cfg.box_scale * (d as f64).sqrt());
    let results = ctx.map(&jobs, |&(p, r)| -> Result<_, CliError> {
        let seed = stream(path_seeds[p], &format!("restart-{r}"));
        let func = TestFunction::path(draw_path(&kernel, d, cfg.features, stream(path_seeds[p], "path"))?, cfg.sigma)?;
        let model = GpModel::new(kernel.clone(), cfg.sigma)?;
        let x1 = domain.sample(&mut ChaCha8Rng::seed_from_u64(stream(seed, "start")));
        let mut rc = RunConfig::new(x1, lips[p], cfg.budget);
        rc.domain = Some(domain.clone());
        rc.mode = if cfg.sigma == 0.0 { cfg.noiseless_mode } else { cfg.noisy_mode };
        rc.schedule = cfg.schedule;
        rc.seed = stream(seed, "run");
        rc.minimizer = cfg.minimizer.clone();
        rc.grad_tol = cfg.grad_tol;
        let tr = run_local_bo(&func, &model, &rc)?;
        Ok((seed, tr))
    });

    let mut table = Table::new("restarts", &COLUMNS, 2);
    let mut failures = Vec::new();
    // best[p][r-1]: best final value over restarts 1..=r of path p.
    let mut best = vec![Vec::with_capacity(cfg.restarts); cfg.paths];
    for (&(p, r), res) in jobs.iter().zip(results) {
        let (seed, tr) = res?;
        if tr.stop == StopReason::NumericalFailure {
            failures.push(format!("restarts path={p} restart={r}: {}", tr.error.clone().unwrap_or_default()));
        }
        let prev = best[p].last().copied().unwrap_or(f64::INFINITY);
        let b = prev.min(tr.f_final);
        best[p].push(b);
        table.push(vec![
            p.into(),
            r.into(),
            seed.into(),
            tr.f_final.into(),
            b.into(),
            tr.n_total.into(),
            stop_name(tr.stop).into(),
        ]);
    }

    let mut summary = Table::new("restarts_summary", &SUMMARY_COLUMNS, 1);
    for r in 1..=cfg.restarts {
        let col: Vec<f64> = best.iter().map(|b| b[r - 1]).collect();
        summary.push(vec![
            r.into(),
            col.len().into(),
            median(&col).into(),
            quantile(&col, 0.05).into(),
            quantile(&col, 0.95).into(),
        ]);
    }
    let mut gains = Table::new("restarts_gains", &GAIN_COLUMNS, 3);
    for (p, b) in best.iter().enumerate() {
        for &[from, to] in &cfg.gain_windows {
            if to <= cfg.restarts {
                let gain: Cell = (b[from - 1] - b[to - 1]).into();
                gains.push(vec![p.into(), from.into(), to.into(), gain]);
            }
        }
    }
    Ok(Outcome {
        tables: vec![table, summary, gains],
        failures,
    })
}
