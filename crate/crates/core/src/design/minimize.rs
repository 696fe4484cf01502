//! Multi-start minimization of the look-ahead acquisition over batches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::acquisition::GradientLookahead;
use super::bounds::{best_central_step, best_forward_step};
use super::{pair_allocation, Design, Provenance};
use crate::error::{invalid, Result};
use crate::gp::{Dataset, GpModel, GpPosterior};
use crate::kernel::StationaryKernel;
use crate::lbfgs::{self, LbfgsConfig};

/// How the refinement obtains descent information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Closed-form gradient fed to L-BFGS.
    #[default]
    Analytic,
    /// Central differences with step `1e-5·ℓ` fed to L-BFGS.
    FiniteDifference,
    /// Gradient-free cyclic coordinate search.
    CoordinateDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizerConfig {
    /// Random Gaussian starts in addition to the differencing start.
    pub n_random: usize,
    /// Standard deviation of random starts, in lengthscales.
    pub random_scale: f64,
    pub max_iters: usize,
    /// Relative improvement below which a refinement stops.
    pub tol: f64,
    pub mode: GradientMode,
    pub lbfgs_memory: usize,
    pub seed: u64,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            n_random: 3,
            random_scale: 0.5,
            max_iters: 200,
            tol: 1e-8,
            mode: GradientMode::Analytic,
            lbfgs_memory: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizedDesign {
    pub design: Design,
    pub value: f64,
    /// Best acquisition value among the initializations.
    pub initial_value: f64,
}

/// `argmin_Z α_trace(x, Z)` over batches of `b` points.
pub fn minimize_acquisition(
    model: &GpModel,
    data: &Dataset,
    x: &[f64],
    b: usize,
    cfg: &MinimizerConfig,
) -> Result<OptimizedDesign> {
    let post = GpPosterior::fit(model.clone(), data.clone())?;
    minimize_on_posterior(&post, x, b, cfg)
}

/// Per-axis step sizes for the differencing starts, chosen on the closed
/// forms. With no observation noise the jitter plays the role of `σ²`.
fn effective_sigma(model: &GpModel) -> f64 {
    if model.noise_sd > 0.0 {
        model.noise_sd
    } else {
        model.base_jitter().sqrt()
    }
}

fn central_start(kernel: &StationaryKernel, x: &[f64], b: usize, sigma: f64) -> Design {
    let d = x.len();
    let steps: Vec<f64> = pair_allocation(d, b)
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            if m == 0 {
                kernel.axis_lengthscale(i)
            } else {
                best_central_step(kernel, d, i, m, sigma)
            }
        })
        .collect();
    Design::central_allocated(x, b, &steps)
}

fn forward_start(kernel: &StationaryKernel, x: &[f64], b: usize, sigma: f64) -> Design {
    let d = x.len();
    let steps: Vec<f64> = (0..d)
        .map(|i| {
            // Copies of x + h·eᵢ when slots cycle through center and axes.
            let m = (b + d - i - 1) / (d + 1);
            if m == 0 {
                kernel.axis_lengthscale(i)
            } else {
                best_forward_step(kernel, d, i, m, sigma)
            }
        })
        .collect();
    Design::forward_allocated(x, b, &steps)
}

fn random_start(kernel: &StationaryKernel, x: &[f64], b: usize, scale: f64, rng: &mut ChaCha8Rng) -> Design {
    let d = x.len();
    let mut rows = Vec::with_capacity(b * d);
    for _ in 0..b {
        for (i, xi) in x.iter().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            rows.push(xi + scale * kernel.axis_lengthscale(i) * z);
        }
    }
    Design::new(d, rows, Provenance::Random).expect("rows are whole")
}

/// Like [`minimize_acquisition`] on an already conditioned posterior.
pub fn minimize_on_posterior(post: &GpPosterior, x: &[f64], b: usize, cfg: &MinimizerConfig) -> Result<OptimizedDesign> {
    if b == 0 {
        return Err(invalid("b", "batch size must be at least 1"));
    }
    let la = GradientLookahead::new(post, x)?;
    let kernel = &post.model().kernel;
    let sigma = effective_sigma(post.model());
    let eval = |z: &[f64]| la.value(z).unwrap_or(f64::INFINITY);

    // The better of the two differencing patterns is the structured start.
    let mut starts = Vec::with_capacity(cfg.n_random + 1);
    let central = central_start(kernel, x, b, sigma);
    let forward = forward_start(kernel, x, b, sigma);
    let (vc, vf) = (eval(central.rows()), eval(forward.rows()));
    starts.push(if vf < vc { (forward, vf) } else { (central, vc) });
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..cfg.n_random {
        let z = random_start(kernel, x, b, cfg.random_scale, &mut rng);
        let v = eval(z.rows());
        starts.push((z, v));
    }

    let initial_value = starts.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let mut best: Option<(Design, f64)> = None;
    for (z0, v0) in starts {
        let (rows, v) = refine(&la, kernel, z0.rows().to_vec(), v0, cfg);
        let candidate = if v < v0 {
            (Design::new(x.len(), rows, Provenance::Optimized)?, v)
        } else {
            (z0, v0)
        };
        if best.as_ref().is_none_or(|(_, bv)| candidate.1 < *bv) {
            best = Some(candidate);
        }
    }
    let (design, value) = best.expect("at least one start");
    if !value.is_finite() {
        // Every start failed to factor; surface the underlying error.
        la.value(design.rows())?;
    }
    Ok(OptimizedDesign {
        design,
        value,
        initial_value,
    })
}

fn refine(la: &GradientLookahead<'_>, kernel: &StationaryKernel, z0: Vec<f64>, v0: f64, cfg: &MinimizerConfig) -> (Vec<f64>, f64) {
    if !v0.is_finite() || cfg.max_iters == 0 {
        return (z0, v0);
    }
    let d = la.dim();
    let lcfg = LbfgsConfig {
        memory: cfg.lbfgs_memory,
        max_iters: cfg.max_iters,
        rel_tol: cfg.tol,
        grad_tol: 1e-14,
        first_step: 0.1 * kernel.min_lengthscale(),
    };
    match cfg.mode {
        GradientMode::Analytic => {
            let res = lbfgs::minimize(
                |z, g| la.value_and_grad(z, g).unwrap_or(f64::INFINITY),
                z0,
                &lcfg,
            );
            (res.x, res.value)
        }
        GradientMode::FiniteDifference => {
            let res = lbfgs::minimize(
                |z, g| {
                    let v = la.value(z).unwrap_or(f64::INFINITY);
                    if v.is_finite() {
                        let mut zz = z.to_vec();
                        for k in 0..z.len() {
                            let h = 1e-5 * kernel.axis_lengthscale(k % d);
                            zz[k] = z[k] + h;
                            let fp = la.value(&zz).unwrap_or(v);
                            zz[k] = z[k] - h;
                            let fm = la.value(&zz).unwrap_or(v);
                            zz[k] = z[k];
                            g[k] = (fp - fm) / (2.0 * h);
                        }
                    }
                    v
                },
                z0,
                &lcfg,
            );
            (res.x, res.value)
        }
        GradientMode::CoordinateDescent => coordinate_descent(la, kernel, z0, v0, cfg),
    }
}

fn coordinate_descent(
    la: &GradientLookahead<'_>,
    kernel: &StationaryKernel,
    mut z: Vec<f64>,
    mut v: f64,
    cfg: &MinimizerConfig,
) -> (Vec<f64>, f64) {
    let d = la.dim();
    let mut step = 0.1;
    for _ in 0..cfg.max_iters {
        let start = v;
        for k in 0..z.len() {
            let h = step * kernel.axis_lengthscale(k % d);
            for dir in [h, -h] {
                let old = z[k];
                z[k] = old + dir;
                let nv = la.value(&z).unwrap_or(f64::INFINITY);
                if nv < v {
                    v = nv;
                    break;
                }
                z[k] = old;
            }
        }
        if start - v <= cfg.tol * start.abs() {
            step *= 0.5;
            if step < 1e-6 {
                break;
            }
        }
    }
    (z, v)
}

/// Empirical upper estimate of `E_{d,k,σ}(b)`: the optimized trace at the
/// origin with no prior data.
pub fn error_function_empirical(kernel: &StationaryKernel, d: usize, sigma: f64, b: usize, cfg: &MinimizerConfig) -> Result<f64> {
    Ok(error_function_design(kernel, d, sigma, b, cfg)?.value)
}

/// The design attaining [`error_function_empirical`].
pub fn error_function_design(
    kernel: &StationaryKernel,
    d: usize,
    sigma: f64,
    b: usize,
    cfg: &MinimizerConfig,
) -> Result<OptimizedDesign> {
    kernel.check_input_dim(d)?;
    let model = GpModel::new(kernel.clone(), sigma)?;
    let post = GpPosterior::fit(model, Dataset::new(d))?;
    minimize_on_posterior(&post, &vec![0.0; d], b, cfg)
}
