//! Global baselines (GP-UCB, random search) and extreme-value statistics of
//! grid search.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::gp::{Dataset, GpModel, GpPosterior};
use crate::optimizer::BoxDomain;
use crate::sampler::TestFunction;

/// `n` Gaussians with marginal standard deviation `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStats {
    pub s: f64,
    pub n: f64,
}

impl GridStats {
    pub fn new(s: f64, n: f64) -> Result<Self> {
        if !(s > 0.0) || !(n >= 1.0) {
            return Err(invalid("grid", "need s > 0 and n ≥ 1"));
        }
        Ok(Self { s, n })
    }

    pub fn expected_max_bound(&self) -> f64 {
        expected_extreme_bound(self.s, self.n)
    }
}

/// `s·√(2 ln n)`: bound on the expected maximum of `n` possibly correlated
/// centered Gaussians with standard deviation `s`. The minimum is bounded
/// below by the negative.
pub fn expected_extreme_bound(s: f64, n: f64) -> f64 {
    s * (2.0 * n.max(1.0).ln()).sqrt()
}

/// Smallest `n` whose [`expected_extreme_bound`] reaches `|v|`, as
/// `(n, log10 n)`. `n` overflows to infinity long before `log10 n` does.
pub fn equivalent_grid_size(v: f64, s: f64) -> (f64, f64) {
    if v >= 0.0 {
        return (1.0, 0.0);
    }
    let ln_n = v * v / (2.0 * s * s);
    (ln_n.exp(), ln_n / std::f64::consts::LN_10)
}

/// Best-so-far record of a global baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineTrace {
    /// Smallest observed value after each query.
    pub best_so_far: Vec<f64>,
    /// Location of the smallest observed value.
    pub best_x: Vec<f64>,
    /// Noise-free objective at `best_x`.
    pub f_best: f64,
    pub error: Option<String>,
}

/// Uniform random search with `budget` queries in `domain`.
pub fn run_random_search(func: &TestFunction, budget: usize, domain: &BoxDomain, seed: u64) -> Result<BaselineTrace> {
    if let Some(d) = func.dim() {
        check_dim(d, domain.dim())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66_D1CE_4E5B);
    let mut best = (f64::INFINITY, domain.center());
    let mut curve = Vec::with_capacity(budget);
    for _ in 0..budget {
        let x = domain.sample(&mut rng);
        let y = func.query(&x, &mut noise_rng)?;
        if y < best.0 {
            best = (y, x);
        }
        curve.push(best.0);
    }
    let f_best = func.value(&best.1)?;
    Ok(BaselineTrace {
        best_so_far: curve,
        best_x: best.1,
        f_best,
        error: None,
    })
}

/// Exploration weight `β_t` of the lower confidence bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaSchedule {
    Constant(f64),
    /// `2·ln(d·t²·π²/(6δ))`.
    Standard { delta: f64 },
}

impl BetaSchedule {
    pub fn beta(&self, d: usize, t: usize) -> f64 {
        match *self {
            Self::Constant(b) => b,
            Self::Standard { delta } => {
                let t = t.max(1) as f64;
                (2.0 * (d as f64 * t * t * PI * PI / (6.0 * delta)).ln()).max(0.0)
            }
        }
    }
}

impl Default for BetaSchedule {
    fn default() -> Self {
        Self::Standard { delta: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UcbConfig {
    pub beta: BetaSchedule,
    /// Starts of the inner projected descent on the LCB.
    pub starts: usize,
    /// Iterations per start.
    pub inner_iters: usize,
}

impl Default for UcbConfig {
    fn default() -> Self {
        Self {
            beta: BetaSchedule::default(),
            starts: 8,
            inner_iters: 30,
        }
    }
}

/// GP-UCB for minimization: each query minimizes `μ_D(x) - √β_t·σ_D(x)` over
/// `domain`. The first query, where the LCB is constant, is the box center.
pub fn run_gp_ucb(
    func: &TestFunction,
    model: &GpModel,
    budget: usize,
    domain: &BoxDomain,
    cfg: &UcbConfig,
    seed: u64,
) -> Result<BaselineTrace> {
    let d = domain.dim();
    if let Some(fd) = func.dim() {
        check_dim(fd, d)?;
    }
    if domain.lo.iter().chain(&domain.hi).any(|v| !v.is_finite()) {
        return Err(invalid("domain", "GP-UCB needs a finite box"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66_D1CE_4E5B);
    let mut post = GpPosterior::fit(model.clone(), Dataset::new(d))?;
    let mut best = (f64::INFINITY, domain.center());
    let mut curve = Vec::with_capacity(budget);
    let mut error = None;

    for t in 1..=budget {
        let x = if t == 1 {
            domain.center()
        } else {
            let beta = cfg.beta.beta(d, t);
            let mut starts = vec![best.1.clone()];
            starts.extend((1..cfg.starts.max(1)).map(|_| domain.sample(&mut rng)));
            let mut winner = (f64::INFINITY, starts[0].clone());
            for s in starts {
                let (v, x) = descend_lcb(&post, domain, s, beta, cfg.inner_iters);
                if v < winner.0 {
                    winner = (v, x);
                }
            }
            winner.1
        };
        let y = func.query(&x, &mut noise_rng)?;
        if y < best.0 {
            best = (y, x.clone());
        }
        curve.push(best.0);
        if let Err(e) = post.append(&x, &[y]) {
            error = Some(e.to_string());
            break;
        }
    }
    let f_best = func.value(&best.1)?;
    Ok(BaselineTrace {
        best_so_far: curve,
        best_x: best.1,
        f_best,
        error,
    })
}

/// LCB value at `x` plus what its gradient needs: `k(x, X)` solved against
/// the lower factor.
struct LcbPoint {
    value: f64,
    sd: f64,
    v: DVector<f64>,
}

fn lcb_value(post: &GpPosterior, x: &[f64], sqrt_beta: f64) -> LcbPoint {
    let n = post.data().len();
    let kern = &post.model().kernel;
    let kx = DVector::from_iterator(n, (0..n).map(|i| kern.k(x, post.data().row(i))));
    let mean = post.model().mean + kx.dot(post.alpha());
    let v = post.chol().solve_lower_vec(&kx);
    let sd = (kern.outputscale() - v.norm_squared()).max(1e-300).sqrt();
    let value = mean - sqrt_beta * sd;
    LcbPoint {
        value: if value.is_finite() { value } else { f64::INFINITY },
        sd,
        v,
    }
}

fn lcb_grad(post: &GpPosterior, x: &[f64], p: &LcbPoint, sqrt_beta: f64) -> Vec<f64> {
    if post.data().is_empty() {
        return vec![0.0; x.len()];
    }
    let g = post.grad_cross_cov(x);
    // ∇σ² = -2·∇k(x, X)·K⁻¹k(X, x)
    let w = post.chol().solve_upper_vec(&p.v);
    let mut coef = post.alpha().clone();
    coef.axpy(sqrt_beta / p.sd, &w, 1.0);
    (g.transpose() * coef).iter().copied().collect()
}

/// Projected normalized-gradient descent with an adaptive step on the LCB.
fn descend_lcb(post: &GpPosterior, domain: &BoxDomain, x0: Vec<f64>, beta: f64, iters: usize) -> (f64, Vec<f64>) {
    let sb = beta.sqrt();
    let mut x = domain.project(&x0);
    let mut p = lcb_value(post, &x, sb);
    let mut step = 0.5 * post.model().kernel.min_lengthscale();
    for _ in 0..iters {
        if !p.value.is_finite() {
            break;
        }
        let g = lcb_grad(post, &x, &p, sb);
        let gn = g.iter().map(|a| a * a).sum::<f64>().sqrt();
        if gn == 0.0 {
            break;
        }
        let mut improved = false;
        for _ in 0..20 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b / gn).collect();
            let trial = domain.project(&trial);
            let tp = lcb_value(post, &trial, sb);
            if tp.value < p.value {
                x = trial;
                p = tp;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (p.value, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{KernelFamily, StationaryKernel};
    use crate::sampler::{draw_path, FunctionKind};

    #[test]
    fn extreme_bound_values() {
        assert_eq!(expected_extreme_bound(1.0, 1.0), 0.0);
        assert!((expected_extreme_bound(1.0, 1000.0) - 3.7169).abs() < 1e-3);
        let (n, log10) = equivalent_grid_size(-1.0, 1.0);
        assert!((n - 0.5f64.exp()).abs() < 1e-15);
        assert!((log10 - 0.5 / std::f64::consts::LN_10).abs() < 1e-15);
        assert_eq!(equivalent_grid_size(0.0, 1.0), (1.0, 0.0));
        let (_, l) = equivalent_grid_size(-12.9, 1.0);
        assert!((36.0..37.0).contains(&l));
    }

    #[test]
    fn random_search_curve_is_monotone_and_deterministic() {
        let k = StationaryKernel::unit(KernelFamily::Rbf);
        let f = TestFunction::path(draw_path(&k, 2, 256, 4).unwrap(), 0.0).unwrap();
        let dom = BoxDomain::cube(2, 3.0);
        let a = run_random_search(&f, 50, &dom, 9).unwrap();
        assert!(a.best_so_far.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a, run_random_search(&f, 50, &dom, 9).unwrap());
        let one = run_random_search(&f, 1, &dom, 9).unwrap();
        assert_eq!(one.best_so_far.len(), 1);
    }

    #[test]
    fn ucb_starts_at_center_and_improves() {
        let k = StationaryKernel::unit(KernelFamily::Rbf);
        let f = TestFunction::path(draw_path(&k, 1, 256, 2).unwrap(), 0.0).unwrap();
        let model = GpModel::new(k, 0.0).unwrap();
        let dom = BoxDomain::cube(1, 5.0);
        let tr = run_gp_ucb(&f, &model, 30, &dom, &UcbConfig::default(), 1).unwrap();
        assert_eq!(tr.best_so_far[0], f.value(&[0.0]).unwrap());
        assert!(tr.best_so_far.windows(2).all(|w| w[1] <= w[0]));
        assert!(tr.best_so_far[29] < tr.best_so_far[0]);
        let q = TestFunction::new(FunctionKind::Quadratic, 0.0).unwrap();
        assert!(run_gp_ucb(&q, &GpModel::new(StationaryKernel::unit(KernelFamily::Rbf), 0.0).unwrap(), 3, &BoxDomain::cube(2, f64::INFINITY), &UcbConfig::default(), 0).is_err());
    }

    #[test]
    fn lcb_gradient_matches_differences() {
        let k = StationaryKernel::new(KernelFamily::Matern25, 0.7, 1.3).unwrap();
        let model = GpModel::new(k, 0.1).unwrap();
        let x = vec![0.1, -0.4, 0.9, 0.3, -0.2, 0.5];
        let data = Dataset::from_rows(2, x, vec![0.3, -1.0, 0.2]).unwrap();
        let post = GpPosterior::fit(model, data).unwrap();
        let z = [0.2, 0.05];
        let p = lcb_value(&post, &z, 1.7);
        let g = lcb_grad(&post, &z, &p, 1.7);
        for i in 0..2 {
            let h = 1e-6;
            let mut zp = z;
            zp[i] += h;
            let mut zm = z;
            zm[i] -= h;
            let fd = (lcb_value(&post, &zp, 1.7).value - lcb_value(&post, &zm, 1.7).value) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "{fd} {}", g[i]);
        }
    }
}
