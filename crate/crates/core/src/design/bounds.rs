//! Closed forms and upper bounds for the error function
//! `E_{d,k,σ}(b) = inf_Z tr(∇k_Z(0, 0)∇ᵀ)`.

use std::f64::consts::E;

use super::lambert::lambert_w0;
use super::pair_allocation;
use crate::kernel::{KernelFamily, StationaryKernel};

/// `α`, `β` and `γ` of a differencing pattern on one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferencingConstants {
    /// Covariance between the two distinct query locations.
    pub alpha: f64,
    /// `∂ᵢφ(-h·eᵢ)`.
    pub beta: f64,
    /// `σ²/m`.
    pub gamma: f64,
}

fn axis_point(d: usize, i: usize, v: f64) -> Vec<f64> {
    let mut p = vec![0.0; d];
    p[i] = v;
    p
}

fn beta(kernel: &StationaryKernel, d: usize, i: usize, h: f64) -> f64 {
    let mut g = vec![0.0; d];
    kernel.k_and_grad1_into(&axis_point(d, i, -h), &vec![0.0; d], &mut g);
    g[i]
}

impl DifferencingConstants {
    /// Points `±h·eᵢ`, each repeated `m` times: `α = φ(2h·eᵢ)`.
    pub fn central(kernel: &StationaryKernel, d: usize, i: usize, m: usize, h: f64, sigma: f64) -> Self {
        Self {
            alpha: kernel.k(&axis_point(d, i, 2.0 * h), &vec![0.0; d]),
            beta: beta(kernel, d, i, h),
            gamma: sigma * sigma / m as f64,
        }
    }

    /// Points `0` and `h·eᵢ`, each repeated `m` times: `α = φ(h·eᵢ)`.
    pub fn forward(kernel: &StationaryKernel, d: usize, i: usize, m: usize, h: f64, sigma: f64) -> Self {
        Self {
            alpha: kernel.k(&axis_point(d, i, h), &vec![0.0; d]),
            beta: beta(kernel, d, i, h),
            gamma: sigma * sigma / m as f64,
        }
    }
}

/// Trace contribution of axis `i` after conditioning on its `m` central pairs
/// only. With `m = 0` this is the prior curvature.
pub fn central_axis_trace(kernel: &StationaryKernel, d: usize, i: usize, m: usize, h: f64, sigma: f64) -> f64 {
    let c = kernel.lag0_curvature(i);
    if m == 0 {
        return c;
    }
    let k = DifferencingConstants::central(kernel, d, i, m, h, sigma);
    let denom = kernel.outputscale() - k.alpha + k.gamma;
    if denom <= 0.0 {
        return c;
    }
    (c - 2.0 * k.beta * k.beta / denom).max(0.0)
}

/// Forward-differencing analogue of [`central_axis_trace`].
pub fn forward_axis_trace(kernel: &StationaryKernel, d: usize, i: usize, m: usize, h: f64, sigma: f64) -> f64 {
    let c = kernel.lag0_curvature(i);
    if m == 0 {
        return c;
    }
    let k = DifferencingConstants::forward(kernel, d, i, m, h, sigma);
    let sg = kernel.outputscale() + k.gamma;
    let denom = sg * sg - k.alpha * k.alpha;
    if denom <= 0.0 {
        return c;
    }
    (c - sg * k.beta * k.beta / denom).max(0.0)
}

/// `Σᵢ (-∂ᵢ²φ(0) - 2βᵢ²/((s - αᵢ) + γ))`: the trace on the `2md`-point
/// central design when every axis is conditioned only on its own points.
/// Exact for `d = 1`, an upper bound otherwise.
pub fn central_trace_bound(kernel: &StationaryKernel, d: usize, m: usize, h: f64, sigma: f64) -> f64 {
    (0..d).map(|i| central_axis_trace(kernel, d, i, m, h, sigma)).sum()
}

/// `Σᵢ (-∂ᵢ²φ(0) - (s + γ)βᵢ²/((s + γ)² - αᵢ²))` for the `(d + 1)m`-point
/// forward design.
pub fn forward_trace_bound(kernel: &StationaryKernel, d: usize, m: usize, h: f64, sigma: f64) -> f64 {
    (0..d).map(|i| forward_axis_trace(kernel, d, i, m, h, sigma)).sum()
}

/// Golden-section search of `f` over `[lo, hi]` in log space. Returns the
/// best abscissa found.
pub(crate) fn golden_log_search(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    // Coarse scan first so a multimodal profile does not trap the bracket.
    let grid = 48;
    let (a0, b0) = (lo.ln(), hi.ln());
    let step = (b0 - a0) / grid as f64;
    let mut best = (f64::INFINITY, a0);
    for k in 0..=grid {
        let t = a0 + step * k as f64;
        let v = f(t.exp());
        if v < best.0 {
            best = (v, t);
        }
    }
    let (mut a, mut b) = ((best.1 - step).max(a0), (best.1 + step).min(b0));
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let (mut fc, mut fe) = (f(c.exp()), f(e.exp()));
    for _ in 0..80 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e.exp());
        }
    }
    let t = if fc < fe { c } else { e };
    if f(t.exp()) <= best.0 {
        t.exp()
    } else {
        best.1.exp()
    }
}

/// Step size on axis `i` minimizing [`central_axis_trace`] with `m` pairs.
pub fn best_central_step(kernel: &StationaryKernel, d: usize, i: usize, m: usize, sigma: f64) -> f64 {
    let l = kernel.axis_lengthscale(i);
    let mut h = golden_log_search(|h| central_axis_trace(kernel, d, i, m, h, sigma), 1e-4 * l, 3.0 * l);
    if let Some(h0) = analytic_central_step(kernel, i, m, sigma) {
        if central_axis_trace(kernel, d, i, m, h0, sigma) < central_axis_trace(kernel, d, i, m, h, sigma) {
            h = h0;
        }
    }
    h
}

/// Step size on axis `i` minimizing [`forward_axis_trace`] with `m` copies.
pub fn best_forward_step(kernel: &StationaryKernel, d: usize, i: usize, m: usize, sigma: f64) -> f64 {
    let l = kernel.axis_lengthscale(i);
    golden_log_search(|h| forward_axis_trace(kernel, d, i, m, h, sigma), 1e-4 * l, 3.0 * l)
}

/// The step sizes used in the analytic bounds, mapped to the kernel's
/// scale: `h = √(x*/2)` for RBF and `h = γ^{1/4}/√5` for Matérn-5/2, with
/// `γ = σ²/(m s)`.
pub fn analytic_central_step(kernel: &StationaryKernel, i: usize, m: usize, sigma: f64) -> Option<f64> {
    if m == 0 || sigma <= 0.0 {
        return None;
    }
    let l = kernel.axis_lengthscale(i);
    let noise = sigma * sigma / kernel.outputscale();
    let h = match kernel.family() {
        KernelFamily::Rbf => {
            let mf = m as f64;
            let x = 1.0 + lambert_w0(-mf / (E * (mf + noise))).ok()?;
            (x / 2.0).sqrt()
        }
        KernelFamily::Matern25 => (noise / m as f64).powf(0.25) / 5f64.sqrt(),
    };
    (h > 0.0).then_some(h * l)
}

/// `C·max(0, 1 + d - b)`.
pub fn bound_noiseless(kernel: &StationaryKernel, d: usize, b: usize) -> f64 {
    kernel.hessian_diag_max() * (1 + d).saturating_sub(b) as f64
}

/// `d(1 + W(-m/(e(m + σ²))))` for the unit RBF kernel and `b = 2md`.
pub fn bound_rbf_lambert(d: usize, m: usize, sigma: f64) -> f64 {
    d as f64 * rbf_axis_bound(m, sigma * sigma)
}

/// The relaxation `d·√(2σ²/(m + σ²))` of [`bound_rbf_lambert`].
pub fn bound_rbf_taylor(d: usize, m: usize, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    d as f64 * (2.0 * s2 / (m as f64 + s2)).sqrt()
}

fn rbf_axis_bound(m: usize, noise_var: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mf = m as f64;
    let arg = -mf / (E * (mf + noise_var));
    // The argument always lies in [-1/e, 0).
    (1.0 + lambert_w0(arg).unwrap_or(-1.0)).max(0.0)
}

/// `g(x) = 1 - m e⁻ˣ x / (m(1 - e⁻ˣ) + σ²)`, the relaxed per-axis RBF trace
/// as a function of `x = 2h²`. Its minimum over `x ≥ 0` is the per-axis
/// Lambert bound, attained at the fixed point `g(x*) = x*`.
pub fn rbf_relaxed_axis_trace(m: usize, sigma: f64, x: f64) -> f64 {
    let mf = m as f64;
    let ex = (-x).exp();
    1.0 - mf * ex * x / (mf * (1.0 - ex) + sigma * sigma)
}

/// `d((15/2)σm^{-1/2} + (70/9)σ^{3/2}m^{-3/4})` for the unit Matérn-5/2
/// kernel and `b = 2md`.
pub fn bound_matern(d: usize, m: usize, sigma: f64) -> f64 {
    d as f64 * matern_axis_formula(m as f64, sigma)
}

fn matern_axis_formula(m: f64, sigma: f64) -> f64 {
    7.5 * sigma / m.sqrt() + 70.0 / 9.0 * sigma.powf(1.5) / m.powf(0.75)
}

/// [`bound_matern`] rewritten in the batch size: with `m = b/(2d)` the leading
/// term is `(15√2/2)·σ·d^{3/2}·b^{-1/2}`.
pub fn bound_matern_batch(d: usize, b: usize, sigma: f64) -> f64 {
    let (df, bf) = (d as f64, b as f64);
    15.0 * 2f64.sqrt() / 2.0 * sigma * df.powf(1.5) / bf.sqrt()
        + 70.0 / 9.0 * sigma.powf(1.5) * df * (bf / (2.0 * df)).powf(-0.75)
}

/// Upper bound on `E_{d,k,σ}(b)` for any kernel, batch size and noise.
///
/// Pairs are dealt round-robin over the axes; each axis contributes its
/// Lambert (RBF) or Matérn bound scaled to the kernel's hyperparameters, or
/// its prior curvature if it received no pairs. Noiseless batches use
/// [`bound_noiseless`].
pub fn error_bound_upper(kernel: &StationaryKernel, d: usize, sigma: f64, b: usize) -> f64 {
    if sigma <= 0.0 {
        return bound_noiseless(kernel, d, b);
    }
    let s = kernel.outputscale();
    let noise = sigma * sigma / s;
    pair_allocation(d, b)
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            let c = kernel.lag0_curvature(i);
            let unit = match kernel.family() {
                KernelFamily::Rbf => rbf_axis_bound(m, noise),
                KernelFamily::Matern25 if m == 0 => 5.0 / 3.0,
                KernelFamily::Matern25 => matern_axis_formula(m as f64, noise.sqrt()).min(5.0 / 3.0),
            };
            let l = kernel.axis_lengthscale(i);
            (s / (l * l) * unit).min(c)
        })
        .sum()
}

/// `P(‖u‖ > t) ≤ 2·exp(-t²/(2 tr Σ))` for a centered Gaussian vector `u`.
pub fn gaussian_norm_tail_bound(t: f64, trace: f64) -> f64 {
    (2.0 * (-t * t / (2.0 * trace)).exp()).min(1.0)
}

/// `p_n(x) = Σ_{i≤n} xⁱ/i!`. For odd `n` this lower-bounds `eˣ` on the whole
/// real line.
pub fn exp_taylor_poly(x: f64, n: usize) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 1..=n {
        term *= x / i as f64;
        sum += term;
    }
    sum
}
