//! Objectives for the optimization experiments: random-feature draws from a
//! GP prior and a few analytic test functions, each with a noisy oracle.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{check_dim, invalid, Error, Result};
use crate::kernel::{KernelFamily, StationaryKernel};

/// Default number of random features.
pub const DEFAULT_FEATURES: usize = 4096;

/// `f(x) = √(2s/M)·Σⱼ wⱼ cos(ωⱼ·x + bⱼ)` with `ω` drawn from the kernel's
/// spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    kernel: StationaryKernel,
    dim: usize,
    /// Row-major `M×d`.
    omega: Vec<f64>,
    phase: Vec<f64>,
    weight: Vec<f64>,
    amplitude: f64,
    seed: u64,
}

/// Draws a path with `features` cosine features in `dim` dimensions.
pub fn draw_path(kernel: &StationaryKernel, dim: usize, features: usize, seed: u64) -> Result<SamplePath> {
    if features == 0 {
        return Err(invalid("features", "need at least one random feature"));
    }
    kernel.check_input_dim(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = ChiSquared::<f64>::new(5.0).expect("positive degrees of freedom");
    let mut omega = Vec::with_capacity(features * dim);
    let mut phase = Vec::with_capacity(features);
    let mut weight = Vec::with_capacity(features);
    for _ in 0..features {
        // Student-t with 5 degrees of freedom as a Gaussian / χ² ratio.
        let scale = match kernel.family() {
            KernelFamily::Rbf => 1.0,
            KernelFamily::Matern25 => (5.0 / chi.sample(&mut rng)).sqrt(),
        };
        for i in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            omega.push(z * scale / kernel.axis_lengthscale(i));
        }
        phase.push(rng.random_range(0.0..2.0 * PI));
        weight.push(StandardNormal.sample(&mut rng));
    }
    Ok(SamplePath {
        kernel: kernel.clone(),
        dim,
        omega,
        phase,
        weight,
        amplitude: (2.0 * kernel.outputscale() / features as f64).sqrt(),
        seed,
    })
}

impl SamplePath {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> usize {
        self.phase.len()
    }

    pub fn kernel(&self) -> &StationaryKernel {
        &self.kernel
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn arg(&self, j: usize, x: &[f64]) -> f64 {
        let w = &self.omega[j * self.dim..(j + 1) * self.dim];
        w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.phase[j]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = (0..self.features()).map(|j| self.weight[j] * self.arg(j, x).cos()).sum();
        self.amplitude * s
    }

    pub fn grad(&self, x: &[f64]) -> DVector<f64> {
        let d = self.dim;
        let mut g = DVector::zeros(d);
        for j in 0..self.features() {
            let c = -self.amplitude * self.weight[j] * self.arg(j, x).sin();
            for i in 0..d {
                g[i] += c * self.omega[j * d + i];
            }
        }
        g
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim;
        let mut h = DMatrix::zeros(d, d);
        for j in 0..self.features() {
            let c = -self.amplitude * self.weight[j] * self.arg(j, x).cos();
            let w = &self.omega[j * d..(j + 1) * d];
            for a in 0..d {
                for b in 0..=a {
                    h[(a, b)] += c * w[a] * w[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        h
    }

    /// `(2/M)·Σⱼ cos(ωⱼ·x + bⱼ) cos(ωⱼ·x′ + bⱼ)·s`: the covariance implied by
    /// the features, averaged over the weights.
    pub fn feature_covariance(&self, x1: &[f64], x2: &[f64]) -> f64 {
        let s: f64 = (0..self.features()).map(|j| self.arg(j, x1).cos() * self.arg(j, x2).cos()).sum();
        self.amplitude * self.amplitude * s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionKind {
    Path(SamplePath),
    /// `½‖x‖²`.
    Quadratic,
    /// `‖x‖₁`.
    L1Norm,
    /// `max(0, x)` in one dimension.
    Relu1d,
}

/// An objective with additive Gaussian observation noise.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub kind: FunctionKind,
    pub noise_sd: f64,
}

impl TestFunction {
    pub fn new(kind: FunctionKind, noise_sd: f64) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(invalid("noise_sd", format!("must be nonnegative, got {noise_sd}")));
        }
        Ok(Self { kind, noise_sd })
    }

    pub fn path(path: SamplePath, noise_sd: f64) -> Result<Self> {
        Self::new(FunctionKind::Path(path), noise_sd)
    }

    /// Required input dimension, if the objective fixes one.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            FunctionKind::Path(p) => Some(p.dim()),
            FunctionKind::Relu1d => Some(1),
            FunctionKind::Quadratic | FunctionKind::L1Norm => None,
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        match self.dim() {
            Some(d) => check_dim(d, x.len()),
            None if x.is_empty() => Err(invalid("x", "empty point")),
            None => Ok(()),
        }
    }

    /// Noise-free value.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(match &self.kind {
            FunctionKind::Path(p) => p.value(x),
            FunctionKind::Quadratic => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            FunctionKind::L1Norm => x.iter().map(|v| v.abs()).sum(),
            FunctionKind::Relu1d => x[0].max(0.0),
        })
    }

    /// `f(x) + ε`, `ε ~ N(0, σ²)` drawn from `rng`; exact when `σ = 0`.
    pub fn query<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        let f = self.value(x)?;
        if self.noise_sd == 0.0 {
            return Ok(f);
        }
        let e: f64 = StandardNormal.sample(rng);
        Ok(f + self.noise_sd * e)
    }

    /// Exact gradient. Fails at a kink of the ℓ1 norm or the ReLU.
    pub fn true_grad(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check(x)?;
        let kink = |i: usize| Error::UndefinedGradient { coordinate: i };
        Ok(match &self.kind {
            FunctionKind::Path(p) => p.grad(x),
            FunctionKind::Quadratic => DVector::from_column_slice(x),
            FunctionKind::L1Norm => {
                if let Some(i) = x.iter().position(|v| *v == 0.0) {
                    return Err(kink(i));
                }
                DVector::from_iterator(x.len(), x.iter().map(|v| v.signum()))
            }
            FunctionKind::Relu1d => {
                if x[0] == 0.0 {
                    return Err(kink(0));
                }
                DVector::from_element(1, if x[0] > 0.0 { 1.0 } else { 0.0 })
            }
        })
    }

    /// Exact Hessian where it exists (zero away from the kinks of the
    /// piecewise-linear objectives).
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let d = x.len();
        Ok(match &self.kind {
            FunctionKind::Path(p) => p.hessian(x),
            FunctionKind::Quadratic => DMatrix::identity(d, d),
            FunctionKind::L1Norm | FunctionKind::Relu1d => DMatrix::zeros(d, d),
        })
    }

    /// Euclidean distance from `g` to the subdifferential at `x` of the ℓ1
    /// norm or the ReLU, or to the gradient of the smooth objectives.
    pub fn subdifferential_distance(&self, x: &[f64], g: &[f64]) -> Result<f64> {
        self.check(x)?;
        check_dim(x.len(), g.len())?;
        let interval = |lo: f64, hi: f64, v: f64| if v < lo { lo - v } else if v > hi { v - hi } else { 0.0 };
        let sq: f64 = match &self.kind {
            FunctionKind::L1Norm => x
                .iter()
                .zip(g)
                .map(|(xi, gi)| {
                    let e = if *xi == 0.0 { interval(-1.0, 1.0, *gi) } else { gi - xi.signum() };
                    e * e
                })
                .sum(),
            FunctionKind::Relu1d => {
                let e = if x[0] == 0.0 {
                    interval(0.0, 1.0, g[0])
                } else {
                    g[0] - if x[0] > 0.0 { 1.0 } else { 0.0 }
                };
                e * e
            }
            _ => {
                let t = self.true_grad(x)?;
                t.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum()
            }
        };
        Ok(sq.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_path(family: KernelFamily, d: usize, seed: u64) -> SamplePath {
        draw_path(&StationaryKernel::unit(family), d, 512, seed).unwrap()
    }

    #[test]
    fn deterministic_under_seed() {
        let a = unit_path(KernelFamily::Rbf, 3, 7);
        let b = unit_path(KernelFamily::Rbf, 3, 7);
        let x = [0.3, -0.1, 0.8];
        assert_eq!(a.value(&x), b.value(&x));
        assert_ne!(a.value(&x), unit_path(KernelFamily::Rbf, 3, 8).value(&x));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for family in [KernelFamily::Rbf, KernelFamily::Matern25] {
            let p = unit_path(family, 3, 11);
            let x = [0.2, -0.4, 0.7];
            let g = p.grad(&x);
            let hm = p.hessian(&x);
            let h = 1e-5;
            for i in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()));
                let gd = (p.grad(&xp) - p.grad(&xm)) / (2.0 * h);
                for j in 0..3 {
                    assert!((gd[j] - hm[(j, i)]).abs() < 1e-4 * (1.0 + gd[j].abs()));
                }
            }
        }
    }

    #[test]
    fn analytic_objectives() {
        let q = TestFunction::new(FunctionKind::Quadratic, 0.0).unwrap();
        assert_eq!(q.true_grad(&[1.0, -2.0]).unwrap().as_slice(), &[1.0, -2.0]);
        let r = TestFunction::new(FunctionKind::Relu1d, 0.0).unwrap();
        assert_eq!(r.true_grad(&[0.5]).unwrap()[0], 1.0);
        assert!(matches!(r.true_grad(&[0.0]), Err(Error::UndefinedGradient { .. })));
        let l1 = TestFunction::new(FunctionKind::L1Norm, 0.0).unwrap();
        assert!(l1.true_grad(&[0.0, 1.0]).is_err());
        assert_eq!(l1.subdifferential_distance(&[0.0, 1.0], &[0.4, 1.0]).unwrap(), 0.0);
        assert!((l1.subdifferential_distance(&[0.0, 1.0], &[1.5, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(r.subdifferential_distance(&[0.0], &[0.7]).unwrap(), 0.0);
    }

    #[test]
    fn noiseless_query_is_exact() {
        let p = TestFunction::path(unit_path(KernelFamily::Rbf, 2, 3), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p.query(&[0.1, 0.2], &mut rng).unwrap(), p.value(&[0.1, 0.2]).unwrap());
    }
}
