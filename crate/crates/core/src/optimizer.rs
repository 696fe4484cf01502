//! The local BO loop: choose a batch minimizing the look-ahead gradient
//! uncertainty, query it, and step along the posterior mean gradient.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{error_bound_upper, minimize_on_posterior, MinimizerConfig};
use crate::error::{check_dim, invalid, Error, Result};
use crate::gp::{Dataset, GpModel, GpPosterior};
use crate::kernel::StationaryKernel;
use crate::sampler::{FunctionKind, TestFunction};

/// Rule for the number of queries `b_t` in iteration `t ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BatchSchedule {
    Constant(usize),
    /// `d + 1`.
    DPlusOne,
    /// `max(1, ⌈d·ln²t⌉)`.
    DLogSqT,
    /// `d·t`.
    LinearDT,
    /// `d·t²`.
    QuadraticDT2,
}

impl BatchSchedule {
    pub fn batch(&self, d: usize, t: usize) -> usize {
        let t = t.max(1);
        match *self {
            Self::Constant(b) => b,
            Self::DPlusOne => d + 1,
            Self::DLogSqT => {
                let l = (t as f64).ln();
                ((d as f64 * l * l).ceil() as usize).max(1)
            }
            Self::LinearDT => d * t,
            Self::QuadraticDT2 => d * t * t,
        }
    }

    /// Polynomial growth exponent `a` in `b_t = d·tᵃ`, where one applies.
    pub fn exponent(&self) -> Option<f64> {
        match self {
            Self::LinearDT => Some(1.0),
            Self::QuadraticDT2 => Some(2.0),
            _ => None,
        }
    }
}

impl fmt::Display for BatchSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(b) => write!(f, "constant:{b}"),
            Self::DPlusOne => f.write_str("d+1"),
            Self::DLogSqT => f.write_str("d-log2-t"),
            Self::LinearDT => f.write_str("d-t"),
            Self::QuadraticDT2 => f.write_str("d-t2"),
        }
    }
}

impl FromStr for BatchSchedule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "d+1" => Ok(Self::DPlusOne),
            "d-log2-t" => Ok(Self::DLogSqT),
            "d-t" => Ok(Self::LinearDT),
            "d-t2" => Ok(Self::QuadraticDT2),
            other => other
                .strip_prefix("constant:")
                .and_then(|b| b.parse().ok())
                .filter(|b| *b > 0)
                .map(Self::Constant)
                .ok_or_else(|| {
                    format!("unknown batch schedule `{other}` (expected d+1, d-log2-t, d-t, d-t2 or constant:<b>)")
                }),
        }
    }
}

impl TryFrom<String> for BatchSchedule {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<BatchSchedule> for String {
    fn from(s: BatchSchedule) -> String {
        s.to_string()
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(invalid("domain", "every lower bound must not exceed its upper bound"));
        }
        Ok(Self { lo, hi })
    }

    /// `[-r, r]^d`.
    pub fn cube(d: usize, r: f64) -> Self {
        Self {
            lo: vec![-r; d],
            hi: vec![r; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        project_box(x, &self.lo, &self.hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| if a < b { rng.random_range(*a..*b) } else { *a })
            .collect()
    }
}

/// Componentwise clamp of `x` to `[lo, hi]`.
pub fn project_box(x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter().zip(lo.iter().zip(hi)).map(|(v, (a, b))| v.clamp(*a, *b)).collect()
}

/// `G(x) = (x - proj(x - η·g))/η`.
pub fn gradient_mapping(x: &[f64], grad: &[f64], eta: f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let step: Vec<f64> = x.iter().zip(grad).map(|(a, g)| a - eta * g).collect();
    let p = project_box(&step, lo, hi);
    x.iter().zip(&p).map(|(a, b)| (a - b) / eta).collect()
}

/// `C_t = 2·ln(π²t²/(6δ))`.
pub fn confidence_multiplier(t: usize, delta: f64) -> f64 {
    let t = t as f64;
    2.0 * (PI * PI * t * t / (6.0 * delta)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StepMode {
    /// `x_{t+1} = proj(x_t - ∇μ/L)`.
    #[default]
    GradientDescent,
    /// Quasi-Newton steps on the estimated gradients with a backtracking
    /// line search on exact function values.
    BfgsHandoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Maximum number of iterations `T`.
    pub max_iters: usize,
    /// Maximum total number of queries.
    pub budget: usize,
    /// Smoothness constant; the step size is `1/L`.
    pub lipschitz: f64,
    pub delta: f64,
    pub domain: Option<BoxDomain>,
    pub x1: Vec<f64>,
    pub mode: StepMode,
    pub schedule: BatchSchedule,
    pub seed: u64,
    pub minimizer: MinimizerConfig,
    /// Noiseless runs stop once the estimated gradient norm drops below this.
    pub grad_tol: f64,
    /// Condition only on the last `window` batches. `None` keeps everything.
    pub window: Option<usize>,
}

impl RunConfig {
    pub fn new(x1: Vec<f64>, lipschitz: f64, budget: usize) -> Self {
        Self {
            max_iters: usize::MAX,
            budget,
            lipschitz,
            delta: 0.1,
            domain: None,
            x1,
            mode: StepMode::GradientDescent,
            schedule: BatchSchedule::DPlusOne,
            seed: 0,
            minimizer: MinimizerConfig::default(),
            grad_tol: 1e-6,
            window: None,
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(invalid("lipschitz", "must be positive and finite"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", "must lie in (0, 1)"));
        }
        if self.budget == 0 || self.budget < self.schedule.batch(d, 1) {
            return Err(invalid("budget", "must cover the first batch"));
        }
        if let Some(dom) = &self.domain {
            check_dim(d, dom.dim())?;
        }
        Ok(())
    }
}

/// One iteration of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub eta: f64,
    pub b: usize,
    /// `∇μ_{D_t}(x_t)`.
    pub est_grad: Vec<f64>,
    /// `tr(∇k_{D_t}(x_t, x_t)∇ᵀ)`.
    pub trace: f64,
    /// Exact queries spent by the line search in this iteration.
    pub line_search: usize,
    /// Queries made so far, including the line search.
    pub n_cum: usize,
    pub y_best: f64,
    /// Noise-free objective at `x_t`.
    pub f_true: f64,
    pub true_grad_norm: Option<f64>,
    pub c_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIters,
    Budget,
    GradTol,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    pub stop: StopReason,
    /// Set when the run ended on a numerical failure.
    pub error: Option<String>,
    /// The model's kernel differs from the prior the path was drawn from.
    pub misspecified: bool,
    /// Final iterate and its noise-free value.
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub n_total: usize,
}

impl RunTrace {
    /// Running minimum of `‖∇f(x_t)‖²` over the recorded iterations.
    pub fn running_min_grad_sq(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.records
            .iter()
            .map(|r| {
                if let Some(g) = r.true_grad_norm {
                    best = best.min(g * g);
                }
                best
            })
            .collect()
    }
}

/// Runs the local BO loop on `func` starting from `cfg.x1`.
pub fn run_local_bo(func: &TestFunction, model: &GpModel, cfg: &RunConfig) -> Result<RunTrace> {
    let d = cfg.x1.len();
    if let Some(fd) = func.dim() {
        check_dim(fd, d)?;
    }
    model.kernel.check_input_dim(d)?;
    cfg.validate(d)?;
    let misspecified = match &func.kind {
        FunctionKind::Path(p) => p.kernel() != &model.kernel || func.noise_sd != model.noise_sd,
        _ => false,
    };
    let noiseless = func.noise_sd == 0.0;
    let eta = 1.0 / cfg.lipschitz;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut state = LoopState {
        func,
        post: GpPosterior::fit(model.clone(), Dataset::new(d))?,
        batch_sizes: Vec::new(),
        window: cfg.window,
        n: 0,
        y_best: f64::INFINITY,
    };
    let mut x = match &cfg.domain {
        Some(dom) => dom.project(&cfg.x1),
        None => cfg.x1.clone(),
    };
    let mut records = Vec::new();
    let mut bfgs = Bfgs::new(d, cfg.lipschitz);
    let mut f_x = None;
    let mut stop = StopReason::MaxIters;
    let mut error = None;

    let mut t = 0;
    while t < cfg.max_iters {
        t += 1;
        let remaining = cfg.budget.saturating_sub(state.n);
        let b = cfg.schedule.batch(d, t).min(remaining);
        if b == 0 {
            stop = StopReason::Budget;
            break;
        }
        let mut mcfg = cfg.minimizer.clone();
        mcfg.seed = cfg.minimizer.seed ^ cfg.seed.rotate_left(17) ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let step = minimize_on_posterior(&state.post, &x, b, &mcfg)
            .and_then(|z| state.observe(z.design.rows(), &mut rng))
            .and_then(|_| state.post.grad_posterior(&x));
        let (mean_grad, cov) = match step {
            Ok(v) => v,
            Err(e) => {
                stop = StopReason::NumericalFailure;
                error = Some(e.to_string());
                break;
            }
        };
        let trace = cov.trace();
        let est_grad: Vec<f64> = mean_grad.iter().copied().collect();
        let true_grad_norm = func.true_grad(&x).ok().map(|g| g.norm());
        let f_true = func.value(&x)?;
        let g_norm = mean_grad.norm();

        let mut record = IterRecord {
            t,
            x: x.clone(),
            eta,
            b,
            est_grad: est_grad.clone(),
            trace,
            line_search: 0,
            n_cum: state.n,
            y_best: state.y_best,
            f_true,
            true_grad_norm,
            c_t: confidence_multiplier(t, cfg.delta),
        };

        if noiseless && g_norm < cfg.grad_tol {
            records.push(record);
            stop = StopReason::GradTol;
            break;
        }

        x = match cfg.mode {
            StepMode::GradientDescent => {
                let next: Vec<f64> = x.iter().zip(&est_grad).map(|(a, g)| a - eta * g).collect();
                match &cfg.domain {
                    Some(dom) => dom.project(&next),
                    None => next,
                }
            }
            StepMode::BfgsHandoff => {
                let fx = match f_x {
                    Some(v) => v,
                    None => match state.observe_one(&x, &mut rng, cfg.budget) {
                        Some(v) => v,
                        None => {
                            records.push(record);
                            stop = StopReason::Budget;
                            break;
                        }
                    },
                };
                bfgs.update(&x, &mean_grad);
                let (next, fnext) = bfgs.line_search(&x, fx, &mean_grad, &mut state, &mut rng, cfg);
                record.line_search = state.n - record.n_cum;
                record.n_cum = state.n;
                record.y_best = state.y_best;
                f_x = Some(fnext);
                next
            }
        };
        records.push(record);
        if state.n >= cfg.budget {
            stop = StopReason::Budget;
            break;
        }
    }

    let f_final = func.value(&x)?;
    Ok(RunTrace {
        records,
        stop,
        error,
        misspecified,
        x_final: x,
        f_final,
        n_total: state.n,
    })
}

struct LoopState<'a> {
    func: &'a TestFunction,
    post: GpPosterior,
    batch_sizes: Vec<usize>,
    window: Option<usize>,
    n: usize,
    y_best: f64,
}

impl LoopState<'_> {
    fn observe(&mut self, rows: &[f64], rng: &mut ChaCha8Rng) -> Result<()> {
        let d = self.post.data().dim();
        let ys = rows
            .chunks(d)
            .map(|r| self.func.query(r, rng))
            .collect::<Result<Vec<f64>>>()?;
        self.n += ys.len();
        self.y_best = ys.iter().copied().fold(self.y_best, f64::min);
        self.batch_sizes.push(ys.len());
        if let Some(w) = self.window {
            if self.batch_sizes.len() > w {
                let keep: usize = self.batch_sizes[self.batch_sizes.len() - w..].iter().sum::<usize>() - ys.len();
                let mut data = self.post.data().tail(keep);
                data.extend(rows, &ys)?;
                self.post = GpPosterior::fit(self.post.model().clone(), data)?;
                return Ok(());
            }
        }
        self.post.append(rows, &ys)
    }

    /// Single exact query that also joins the data set. `None` when the
    /// budget is exhausted or conditioning fails.
    fn observe_one(&mut self, x: &[f64], rng: &mut ChaCha8Rng, budget: usize) -> Option<f64> {
        if self.n >= budget {
            return None;
        }
        let y = self.func.query(x, rng).ok()?;
        self.n += 1;
        self.y_best = self.y_best.min(y);
        if let Some(last) = self.batch_sizes.last_mut() {
            *last += 1;
        }
        self.post.append(x, &[y]).ok()?;
        Some(y)
    }
}

/// Dense BFGS inverse-Hessian approximation, reset to `I/L`.
struct Bfgs {
    h: DMatrix<f64>,
    lipschitz: f64,
    prev: Option<(DVector<f64>, DVector<f64>)>,
}

impl Bfgs {
    fn new(d: usize, lipschitz: f64) -> Self {
        Self {
            h: DMatrix::identity(d, d) / lipschitz,
            lipschitz,
            prev: None,
        }
    }

    fn reset(&mut self) {
        let d = self.h.nrows();
        self.h = DMatrix::identity(d, d) / self.lipschitz;
    }

    fn update(&mut self, x: &[f64], g: &DVector<f64>) {
        let x = DVector::from_column_slice(x);
        if let Some((xp, gp)) = self.prev.take() {
            let s = &x - xp;
            let y = g - gp;
            let sy = s.dot(&y);
            if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
                let rho = 1.0 / sy;
                let d = s.len();
                let i = DMatrix::<f64>::identity(d, d);
                let a = &i - &s * y.transpose() * rho;
                self.h = &a * &self.h * a.transpose() + &s * s.transpose() * rho;
            }
        }
        self.prev = Some((x, g.clone()));
    }

    /// Armijo backtracking along `-H·g` with exact queries that join the data.
    fn line_search(
        &mut self,
        x: &[f64],
        fx: f64,
        g: &DVector<f64>,
        state: &mut LoopState<'_>,
        rng: &mut ChaCha8Rng,
        cfg: &RunConfig,
    ) -> (Vec<f64>, f64) {
        let mut p = -(&self.h * g);
        let mut slope = g.dot(&p);
        if !(slope < 0.0) {
            self.reset();
            p = -(&self.h * g);
            slope = g.dot(&p);
        }
        let mut step = 1.0;
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..10 {
            let mut trial: Vec<f64> = x.iter().zip(p.iter()).map(|(a, v)| a + step * v).collect();
            if let Some(dom) = &cfg.domain {
                trial = dom.project(&trial);
            }
            let Some(ft) = state.observe_one(&trial, rng, cfg.budget) else {
                break;
            };
            if ft <= fx + 1e-4 * step * slope {
                return (trial, ft);
            }
            if best.as_ref().is_none_or(|(_, fb)| ft < *fb) {
                best = Some((trial, ft));
            }
            step *= 0.5;
        }
        self.reset();
        self.prev = None;
        match best {
            Some((xb, fb)) if fb < fx => (xb, fb),
            _ => (x.to_vec(), fx),
        }
    }
}

/// Smoothness estimate: `safety` times the largest Hessian spectral norm
/// over `samples` uniform points of `region`.
pub fn estimate_smoothness(func: &TestFunction, region: &BoxDomain, samples: usize, safety: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let x = region.sample(&mut rng);
        let h = func.hessian(&x)?;
        let eig = SymmetricEigen::new(h).eigenvalues;
        best = best.max(eig.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    Ok(safety * best)
}

/// Region used for the smoothness estimate when no domain is configured:
/// a cube of half-width `2ℓ` around `x1`.
pub fn smoothness_region(kernel: &StationaryKernel, x1: &[f64], domain: Option<&BoxDomain>) -> BoxDomain {
    match domain {
        Some(dom) => dom.clone(),
        None => {
            let r = 2.0 * kernel.min_lengthscale();
            BoxDomain {
                lo: x1.iter().map(|v| v - r).collect(),
                hi: x1.iter().map(|v| v + r).collect(),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    /// `2L(f(x₁) - f*)/T + B²·E_{d,k,0}(b)`.
    NoiselessRkhs,
    /// `2L(f(x₁) - f*)/T + (1/T)·Σ C_t·E_{d,k,σ}(b_t)`.
    NoisyGeneral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateParams {
    pub kernel: StationaryKernel,
    pub d: usize,
    pub sigma: f64,
    pub lipschitz: f64,
    /// `f(x₁) - f*` or an upper surrogate.
    pub gap: f64,
    /// RKHS norm bound `B`.
    pub rkhs_norm: f64,
    pub delta: f64,
    pub schedule: BatchSchedule,
}

/// Right-hand side of the convergence bound for `T = 1..=t_max`.
pub fn rate_reference(kind: RateKind, p: &RateParams, t_max: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (1..=t_max)
        .map(|t| {
            let tf = t as f64;
            let b = p.schedule.batch(p.d, t);
            let first = 2.0 * p.lipschitz * p.gap / tf;
            match kind {
                RateKind::NoiselessRkhs => first + p.rkhs_norm * p.rkhs_norm * error_bound_upper(&p.kernel, p.d, 0.0, b),
                RateKind::NoisyGeneral => {
                    acc += confidence_multiplier(t, p.delta) * error_bound_upper(&p.kernel, p.d, p.sigma, b);
                    first + acc / tf
                }
            }
        })
        .collect()
}

/// Descent with gradient errors `‖ĝ_t - ∇f(x_t)‖² ≤ ξ_t`:
/// `min_t ‖∇f(x_t)‖² ≤ 2(f(x₁) - f*)/Σηₜ + Σηₜξₜ/Σηₜ`. The projected variant
/// adds `L'·Σηₜ√ξₜ/Σηₜ` for the gradient mapping, with `L'` a bound on the
/// gradient norm.
pub fn biased_descent_bound(gap: f64, etas: &[f64], xis: &[f64], projected_lip: Option<f64>) -> f64 {
    let se: f64 = etas.iter().sum();
    let bias: f64 = etas.iter().zip(xis).map(|(e, x)| e * x).sum();
    let extra = projected_lip.map_or(0.0, |lp| lp * etas.iter().zip(xis).map(|(e, x)| e * x.sqrt()).sum::<f64>());
    (2.0 * gap + bias + extra) / se
}

/// Exponents of the rate `dᵖ·n^{-q}` (up to log factors) for `b_t = d·tᵃ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateExponents {
    pub d_power: f64,
    /// `q` in `n^{-q}`.
    pub n_decay: f64,
    /// Power of the `log n` factor.
    pub log_power: u32,
}

pub fn polynomial_batch_rate(a: f64) -> Result<RateExponents> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter {
            name: "a",
            reason: "growth exponent must be positive".into(),
        });
    }
    Ok(if (a - 2.0).abs() < 1e-12 {
        RateExponents {
            d_power: 4.0 / 3.0,
            n_decay: 1.0 / 3.0,
            log_power: 2,
        }
    } else if a < 2.0 {
        RateExponents {
            d_power: (3.0 * a + 2.0) / (2.0 * (a + 1.0)),
            n_decay: a / (2.0 * (a + 1.0)),
            log_power: 1,
        }
    } else {
        RateExponents {
            d_power: (a + 2.0) / (a + 1.0),
            n_decay: 1.0 / (a + 1.0),
            log_power: 0,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;

    #[test]
    fn schedules() {
        assert_eq!(BatchSchedule::DPlusOne.batch(4, 9), 5);
        assert_eq!(BatchSchedule::DLogSqT.batch(3, 1), 1);
        assert_eq!(BatchSchedule::DLogSqT.batch(3, 10), (3.0 * 10f64.ln().powi(2)).ceil() as usize);
        assert_eq!(BatchSchedule::LinearDT.batch(2, 5), 10);
        assert_eq!(BatchSchedule::QuadraticDT2.batch(2, 5), 50);
        for s in ["d+1", "d-log2-t", "d-t", "d-t2", "constant:7"] {
            assert_eq!(s.parse::<BatchSchedule>().unwrap().to_string(), s);
        }
        assert!("constant:0".parse::<BatchSchedule>().is_err());
    }

    #[test]
    fn projection_and_mapping() {
        assert_eq!(project_box(&[2.0, -3.0], &[-1.0, -1.0], &[1.0, 1.0]), vec![1.0, -1.0]);
        let g = gradient_mapping(&[0.0, 0.0], &[0.3, -0.2], 0.5, &[-1.0; 2], &[1.0; 2]);
        assert_eq!(g, vec![0.3, -0.2]);
        let g = gradient_mapping(&[1.0, 0.0], &[-2.0, 1.0], 0.1, &[-1.0; 2], &[1.0; 2]);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn confidence_multiplier_at_one() {
        let v = confidence_multiplier(1, 0.1);
        assert!((v - 2.0 * (PI * PI / 0.6).ln()).abs() < 1e-15);
        assert!((v - 5.599).abs() < 2e-3);
    }

    #[test]
    fn quadratic_descent_converges() {
        let f = TestFunction::new(FunctionKind::Quadratic, 0.0).unwrap();
        let model = GpModel::new(StationaryKernel::unit(KernelFamily::Rbf), 0.0).unwrap();
        let mut cfg = RunConfig::new(vec![1.0, 1.0, 1.0], 1.0, 10_000);
        cfg.max_iters = 30;
        cfg.minimizer.n_random = 0;
        let trace = run_local_bo(&f, &model, &cfg).unwrap();
        let norms: Vec<f64> = trace.records.iter().map(|r| r.x.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let hit = trace
            .records
            .iter()
            .position(|r| r.true_grad_norm.unwrap() <= 1e-3)
            .expect("gradient tolerance reached within 30 iterations");
        assert!(norms[..=hit].windows(2).all(|w| w[1] < w[0]));
        let total: usize = trace.records.iter().map(|r| r.b).sum();
        assert_eq!(total, trace.n_total);
    }

    #[test]
    fn final_batch_is_truncated() {
        let f = TestFunction::new(FunctionKind::Quadratic, 0.1).unwrap();
        let model = GpModel::new(StationaryKernel::unit(KernelFamily::Rbf), 0.1).unwrap();
        let mut cfg = RunConfig::new(vec![0.5, 0.5], 1.0, 20);
        cfg.schedule = BatchSchedule::LinearDT;
        cfg.minimizer.n_random = 0;
        let trace = run_local_bo(&f, &model, &cfg).unwrap();
        let bs: Vec<usize> = trace.records.iter().map(|r| r.b).collect();
        assert_eq!(bs, vec![2, 4, 6, 8]);
        assert_eq!(trace.n_total, 20);
        assert_eq!(trace.stop, StopReason::Budget);
    }

    #[test]
    fn batch_rate_exponents() {
        let r = polynomial_batch_rate(2.0).unwrap();
        assert!((r.n_decay - 1.0 / 3.0).abs() < 1e-15);
        // a = 2 is the fastest decay in n.
        for a in [0.5, 1.0, 1.5, 2.5, 3.0, 5.0] {
            assert!(polynomial_batch_rate(a).unwrap().n_decay < r.n_decay);
        }
    }

    #[test]
    fn biased_bound_reduces_to_descent_lemma() {
        let etas = vec![0.5; 10];
        let v = biased_descent_bound(3.0, &etas, &[0.0; 10], None);
        assert!((v - 2.0 * 3.0 / 5.0).abs() < 1e-15);
        assert!(biased_descent_bound(3.0, &etas, &[0.01; 10], Some(2.0)) > v);
    }
}
