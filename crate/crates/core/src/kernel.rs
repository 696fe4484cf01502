//! Stationary covariance functions with analytic derivatives.
//!
//! A stationary kernel is written `k(x, x') = φ(x - x')`. Every kernel here is
//! radial in lengthscale-scaled coordinates `u = (x - x') ⊘ ℓ`, so its
//! derivatives collapse to two scalar profiles: `∇ᵤφ = a(r)·u` and
//! `∇ᵤ²φ = a(r)·I + c(r)·u uᵀ`. Both profiles are smooth at `r = 0`, which lets
//! the Matérn-5/2 derivatives be evaluated without a special case at
//! coincident points.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// Squared exponential, `φ(u) = exp(-‖u‖²/2)`.
    Rbf,
    /// Matérn with smoothness ν = 5/2.
    Matern25,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Rbf => "rbf",
            KernelFamily::Matern25 => "matern25",
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rbf" | "se" => Ok(KernelFamily::Rbf),
            "matern25" | "matern-2.5" | "matern52" | "matern" => Ok(KernelFamily::Matern25),
            other => Err(format!("unknown kernel family `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lengthscale {
    Isotropic(f64),
    /// One lengthscale per input dimension.
    Ard(Vec<f64>),
}

/// Radial profile values at scaled distance `r`: `(φ, a, c)`.
#[derive(Debug, Clone, Copy)]
struct Profile {
    value: f64,
    a: f64,
    c: f64,
}

/// A stationary kernel with fixed hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryKernel {
    family: KernelFamily,
    lengthscale: Lengthscale,
    outputscale: f64,
}

impl StationaryKernel {
    pub fn new(family: KernelFamily, lengthscale: f64, outputscale: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(invalid("lengthscale", format!("must be positive, got {lengthscale}")));
        }
        Self::checked(family, Lengthscale::Isotropic(lengthscale), outputscale)
    }

    pub fn with_ard(family: KernelFamily, lengthscales: Vec<f64>, outputscale: f64) -> Result<Self> {
        if lengthscales.is_empty() || lengthscales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(invalid("lengthscale", "ARD lengthscales must be nonempty and positive"));
        }
        Self::checked(family, Lengthscale::Ard(lengthscales), outputscale)
    }

    fn checked(family: KernelFamily, lengthscale: Lengthscale, outputscale: f64) -> Result<Self> {
        if !(outputscale > 0.0 && outputscale.is_finite()) {
            return Err(invalid("outputscale", format!("must be positive, got {outputscale}")));
        }
        Ok(Self {
            family,
            lengthscale,
            outputscale,
        })
    }

    /// Unit lengthscale and unit outputscale.
    pub fn unit(family: KernelFamily) -> Self {
        Self {
            family,
            lengthscale: Lengthscale::Isotropic(1.0),
            outputscale: 1.0,
        }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn outputscale(&self) -> f64 {
        self.outputscale
    }

    pub fn lengthscale(&self) -> &Lengthscale {
        &self.lengthscale
    }

    /// Lengthscale along axis `i`.
    #[inline]
    pub fn axis_lengthscale(&self, i: usize) -> f64 {
        match &self.lengthscale {
            Lengthscale::Isotropic(l) => *l,
            Lengthscale::Ard(ls) => ls[i],
        }
    }

    /// Smallest lengthscale over all axes.
    pub fn min_lengthscale(&self) -> f64 {
        match &self.lengthscale {
            Lengthscale::Isotropic(l) => *l,
            Lengthscale::Ard(ls) => ls.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    fn ard_len(&self) -> Option<usize> {
        match &self.lengthscale {
            Lengthscale::Isotropic(_) => None,
            Lengthscale::Ard(ls) => Some(ls.len()),
        }
    }

    /// Checks that points of dimension `d` are compatible with this kernel.
    pub fn check_input_dim(&self, d: usize) -> Result<()> {
        match self.ard_len() {
            Some(n) => check_dim(n, d),
            None if d == 0 => Err(invalid("dimension", "points must have at least one coordinate")),
            None => Ok(()),
        }
    }

    #[inline]
    fn profile(&self, r2: f64) -> Profile {
        let s = self.outputscale;
        match self.family {
            KernelFamily::Rbf => {
                let e = s * (-0.5 * r2).exp();
                Profile {
                    value: e,
                    a: -e,
                    c: e,
                }
            }
            KernelFamily::Matern25 => {
                let r = r2.sqrt();
                let e = s * (-SQRT5 * r).exp();
                Profile {
                    value: (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * e,
                    a: -5.0 / 3.0 * e * (1.0 + SQRT5 * r),
                    c: 25.0 / 3.0 * e,
                }
            }
        }
    }

    #[inline]
    fn scaled_sq_dist(&self, x1: &[f64], x2: &[f64]) -> f64 {
        match &self.lengthscale {
            Lengthscale::Isotropic(l) => {
                let inv = 1.0 / (l * l);
                x1.iter()
                    .zip(x2)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    * inv
            }
            Lengthscale::Ard(ls) => x1
                .iter()
                .zip(x2)
                .zip(ls)
                .map(|((a, b), l)| {
                    let u = (a - b) / l;
                    u * u
                })
                .sum(),
        }
    }

    /// `k(x1, x2)` without dimension checks.
    #[inline]
    pub fn k(&self, x1: &[f64], x2: &[f64]) -> f64 {
        self.profile(self.scaled_sq_dist(x1, x2)).value
    }

    /// Writes `∇₁k(x1, x2) = ∇φ(x1 - x2)` into `out`; returns `k(x1, x2)`.
    #[inline]
    pub fn k_and_grad1_into(&self, x1: &[f64], x2: &[f64], out: &mut [f64]) -> f64 {
        let p = self.profile(self.scaled_sq_dist(x1, x2));
        for (i, o) in out.iter_mut().enumerate() {
            let l = self.axis_lengthscale(i);
            *o = p.a * (x1[i] - x2[i]) / (l * l);
        }
        p.value
    }

    /// Writes the cross-Hessian `∂²k/∂x1ᵢ∂x2ⱼ = -∇²φ(x1 - x2)` (row-major, d×d).
    #[inline]
    pub fn cross_hessian_into(&self, x1: &[f64], x2: &[f64], out: &mut [f64]) {
        let d = x1.len();
        let p = self.profile(self.scaled_sq_dist(x1, x2));
        for i in 0..d {
            let li = self.axis_lengthscale(i);
            let ui = (x1[i] - x2[i]) / li;
            for j in 0..d {
                let lj = self.axis_lengthscale(j);
                let uj = (x1[j] - x2[j]) / lj;
                let diag = if i == j { p.a } else { 0.0 };
                out[i * d + j] = -(diag + p.c * ui * uj) / (li * lj);
            }
        }
    }

    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        check_dim(x1.len(), x2.len())?;
        self.check_input_dim(x1.len())?;
        Ok(self.k(x1, x2))
    }

    pub fn grad1(&self, x1: &[f64], x2: &[f64]) -> Result<DVector<f64>> {
        check_dim(x1.len(), x2.len())?;
        self.check_input_dim(x1.len())?;
        let mut g = DVector::zeros(x1.len());
        self.k_and_grad1_into(x1, x2, g.as_mut_slice());
        Ok(g)
    }

    pub fn cross_hessian(&self, x1: &[f64], x2: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(x1.len(), x2.len())?;
        self.check_input_dim(x1.len())?;
        let d = x1.len();
        let mut buf = vec![0.0; d * d];
        self.cross_hessian_into(x1, x2, &mut buf);
        Ok(DMatrix::from_row_slice(d, d, &buf))
    }

    /// Diagonal entry `i` of the cross-Hessian at lag zero, `-∂ᵢ²φ(0)`.
    pub fn lag0_curvature(&self, i: usize) -> f64 {
        let l = self.axis_lengthscale(i);
        -self.profile(0.0).a / (l * l)
    }

    /// `C`: the largest diagonal entry of the cross-Hessian at lag zero.
    pub fn hessian_diag_max(&self) -> f64 {
        match &self.lengthscale {
            Lengthscale::Isotropic(_) => self.lag0_curvature(0),
            Lengthscale::Ard(ls) => (0..ls.len())
                .map(|i| self.lag0_curvature(i))
                .fold(0.0, f64::max),
        }
    }

    /// Trace of the prior gradient covariance in `d` dimensions.
    pub fn prior_grad_trace(&self, d: usize) -> f64 {
        (0..d).map(|i| self.lag0_curvature(i)).sum()
    }

    /// Gram matrix of the rows of a row-major `n×d` buffer.
    pub fn gram(&self, points: &[f64], d: usize) -> DMatrix<f64> {
        let n = points.len() / d;
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            let xi = &points[i * d..(i + 1) * d];
            k[(i, i)] = self.outputscale;
            for j in 0..i {
                let v = self.k(xi, &points[j * d..(j + 1) * d]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd_grad(k: &StationaryKernel, x1: &[f64], x2: &[f64], h: f64) -> Vec<f64> {
        (0..x1.len())
            .map(|i| {
                let mut p = x1.to_vec();
                let mut m = x1.to_vec();
                p[i] += h;
                m[i] -= h;
                (k.k(&p, x2) - k.k(&m, x2)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn unit_values() {
        let rbf = StationaryKernel::unit(KernelFamily::Rbf);
        let mat = StationaryKernel::unit(KernelFamily::Matern25);
        assert_eq!(rbf.eval(&[0.0], &[0.0]).unwrap(), 1.0);
        assert_eq!(mat.eval(&[0.3, 0.2], &[0.3, 0.2]).unwrap(), 1.0);
        let h: f64 = 0.37;
        assert_relative_eq!(rbf.k(&[-h], &[h]), (-2.0 * h * h).exp(), epsilon = 1e-15);
    }

    #[test]
    fn grad_profiles_match_closed_forms() {
        let h: f64 = 0.4;
        let rbf = StationaryKernel::unit(KernelFamily::Rbf);
        let g = rbf.grad1(&[-h], &[0.0]).unwrap();
        assert_relative_eq!(g[0], (-0.5 * h * h).exp() * h, epsilon = 1e-15);

        let mat = StationaryKernel::unit(KernelFamily::Matern25);
        let g = mat.grad1(&[-h], &[0.0]).unwrap();
        let expect = 5.0 / 3.0 * (-SQRT5 * h).exp() * (1.0 + SQRT5 * h) * h;
        assert_relative_eq!(g[0], expect, epsilon = 1e-15);

        assert_eq!(mat.grad1(&[1.0, 2.0], &[1.0, 2.0]).unwrap().norm(), 0.0);
    }

    #[test]
    fn lag0_cross_hessian() {
        let mat = StationaryKernel::unit(KernelFamily::Matern25);
        let h = mat.cross_hessian(&[0.5, 0.5, 0.5], &[0.5, 0.5, 0.5]).unwrap();
        for i in 0..3 {
            assert_relative_eq!(h[(i, i)], 5.0 / 3.0, epsilon = 1e-15);
        }
        assert_relative_eq!(mat.hessian_diag_max(), 5.0 / 3.0);

        let rbf = StationaryKernel::unit(KernelFamily::Rbf);
        let h = rbf.cross_hessian(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(h, DMatrix::identity(2, 2));
        assert_eq!(rbf.hessian_diag_max(), 1.0);

        let scaled = StationaryKernel::new(KernelFamily::Rbf, 0.5, 2.0).unwrap();
        assert_relative_eq!(scaled.hessian_diag_max(), 2.0 / 0.25);
    }

    #[test]
    fn cross_hessian_matches_fd_of_eval() {
        let k = StationaryKernel::unit(KernelFamily::Rbf);
        let x1 = [0.3, -0.7];
        let x2 = [0.0, 0.0];
        let h = 1e-4;
        let ch = k.cross_hessian(&x1, &x2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let f = |di: f64, dj: f64| {
                    let mut a = x1;
                    let mut b = x2;
                    a[i] += di;
                    b[j] += dj;
                    k.k(&a, &b)
                };
                let fd = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
                assert!((fd - ch[(i, j)]).abs() < 1e-6, "{i}{j}: {fd} vs {}", ch[(i, j)]);
            }
        }
    }

    #[test]
    fn ard_gradient_matches_fd() {
        let k = StationaryKernel::with_ard(KernelFamily::Matern25, vec![0.5, 2.0, 1.3], 1.7).unwrap();
        let x1 = [0.2, -0.4, 1.1];
        let x2 = [-0.1, 0.3, 0.6];
        let g = k.grad1(&x1, &x2).unwrap();
        let fd = fd_grad(&k, &x1, &x2, 1e-5);
        for i in 0..3 {
            assert!((g[i] - fd[i]).abs() < 1e-8);
        }
        assert!(k.eval(&[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(StationaryKernel::new(KernelFamily::Rbf, 0.0, 1.0).is_err());
        assert!(StationaryKernel::new(KernelFamily::Rbf, 1.0, -1.0).is_err());
        let k = StationaryKernel::unit(KernelFamily::Rbf);
        assert!(k.eval(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn odd_gradient_and_symmetry() {
        let k = StationaryKernel::new(KernelFamily::Matern25, 0.8, 1.5).unwrap();
        let a = [0.1, 0.9];
        let b = [-0.4, 0.2];
        assert_eq!(k.k(&a, &b), k.k(&b, &a));
        let g1 = k.grad1(&a, &b).unwrap();
        let g2 = k.grad1(&b, &a).unwrap();
        assert_relative_eq!((g1 + g2).norm(), 0.0, epsilon = 1e-15);
    }
}
