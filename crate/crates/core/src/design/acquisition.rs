//! The look-ahead acquisition `α(Z) = tr(∇k_{D∪Z}(x, x)∇ᵀ)` and its gradient
//! with respect to the candidate batch.
//!
//! Everything that depends only on `D` and `x` is computed once; each
//! evaluation then costs one `b×b` Cholesky factorization of the Schur
//! complement of `K_DD` in the joint Gram matrix. The gradient only needs
//! first and second kernel derivatives.

use nalgebra::DMatrix;

use super::Design;
use crate::error::{check_dim, invalid, Result};
use crate::gp::{Dataset, GpModel, GpPosterior};
use crate::linalg::JitteredCholesky;

/// `α_trace(x, Z)` for a fresh posterior on `data`.
pub fn alpha_trace(model: &GpModel, data: &Dataset, x: &[f64], z: &Design) -> Result<f64> {
    let post = GpPosterior::fit(model.clone(), data.clone())?;
    GradientLookahead::new(&post, x)?.value(z.rows())
}

/// Precomputed state for evaluating `α_trace(x, ·)` on a fixed posterior.
pub struct GradientLookahead<'a> {
    post: &'a GpPosterior,
    x: Vec<f64>,
    /// `tr(∇k_D(x, x)∇ᵀ)`.
    base: f64,
    /// `(K + σ²I)⁻¹ ∇k(D, x)`, n×d.
    rt: DMatrix<f64>,
}

/// Per-evaluation intermediates shared by the value and the gradient.
struct Solved {
    value: f64,
    /// `S⁻¹ G`, b×d.
    a: DMatrix<f64>,
    /// `(K + σ²I)⁻¹ K_DZ`, n×b.
    w: DMatrix<f64>,
}

impl<'a> GradientLookahead<'a> {
    pub fn new(post: &'a GpPosterior, x: &[f64]) -> Result<Self> {
        check_dim(post.data().dim(), x.len())?;
        let base = post.grad_cov_trace(x)?;
        let gx = post.grad_cross_cov(x);
        let rt = post.chol().solve(&gx);
        Ok(Self {
            post,
            x: x.to_vec(),
            base,
            rt,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Trace before any new queries.
    pub fn base(&self) -> f64 {
        self.base
    }

    fn solve(&self, z: &[f64]) -> Result<Solved> {
        let d = self.dim();
        if z.is_empty() || z.len() % d != 0 {
            return Err(invalid("Z", "batch must be a nonempty set of whole rows"));
        }
        let b = z.len() / d;
        let kern = &self.post.model().kernel;
        let data = self.post.data();
        let n = data.len();
        let row = |j: usize| &z[j * d..(j + 1) * d];

        let kdz = DMatrix::from_fn(n, b, |i, j| kern.k(data.row(i), row(j)));
        let v = self.post.chol().solve_lower(&kdz);
        let w = self.post.chol().solve_upper(&v);
        let mut s = kern.gram(z, d);
        if n > 0 {
            s -= v.transpose() * &v;
        }
        let model = self.post.model();
        let chol = JitteredCholesky::factor_from(&s, model.noise_var(), model.base_jitter(), self.post.jitter())?;

        let mut g = DMatrix::zeros(b, d);
        let mut buf = vec![0.0; d];
        for j in 0..b {
            kern.k_and_grad1_into(&self.x, row(j), &mut buf);
            for c in 0..d {
                g[(j, c)] = buf[c];
            }
        }
        if n > 0 {
            g -= kdz.transpose() * &self.rt;
        }
        let a = chol.solve(&g);
        let value = self.base - g.component_mul(&a).sum();
        Ok(Solved { value, a, w })
    }

    /// `α_trace(x, Z)` for the row-major batch `z`.
    pub fn value(&self, z: &[f64]) -> Result<f64> {
        Ok(self.solve(z)?.value)
    }

    /// Value, with `∂α/∂Z` written row-major into `grad`.
    pub fn value_and_grad(&self, z: &[f64], grad: &mut [f64]) -> Result<f64> {
        let Solved { value, a, w } = self.solve(z)?;
        let d = self.dim();
        let b = z.len() / d;
        check_dim(z.len(), grad.len())?;
        let kern = &self.post.model().kernel;
        let data = self.post.data();
        let n = data.len();
        let row = |j: usize| &z[j * d..(j + 1) * d];

        let m = &a * a.transpose();
        let q = if n > 0 {
            Some(&self.rt * a.transpose() - &w * &m)
        } else {
            None
        };

        grad.fill(0.0);
        let mut ch = vec![0.0; d * d];
        let mut buf = vec![0.0; d];
        for j in 0..b {
            let zj = row(j);
            let gj = &mut grad[j * d..(j + 1) * d];
            // Through ∇₁k(x, z_j).
            kern.cross_hessian_into(&self.x, zj, &mut ch);
            for i in 0..d {
                let aji = a[(j, i)];
                for c in 0..d {
                    gj[c] -= 2.0 * aji * ch[i * d + c];
                }
            }
            // Through k(z_j, z_l).
            for l in 0..b {
                if l == j {
                    continue;
                }
                let mjl = m[(j, l)];
                kern.k_and_grad1_into(zj, row(l), &mut buf);
                for c in 0..d {
                    gj[c] += 2.0 * mjl * buf[c];
                }
            }
            // Through k(z_j, D).
            if let Some(q) = &q {
                for r in 0..n {
                    let qrj = q[(r, j)];
                    kern.k_and_grad1_into(zj, data.row(r), &mut buf);
                    for c in 0..d {
                        gj[c] += 2.0 * qrj * buf[c];
                    }
                }
            }
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::fantasized_grad_cov_trace;
    use crate::kernel::{KernelFamily, StationaryKernel};

    fn data_2d() -> Dataset {
        Dataset::from_rows(
            2,
            vec![0.3, -0.2, -0.5, 0.4, 0.9, 0.1, 0.0, 0.7],
            vec![0.5, -1.0, 0.2, 0.3],
        )
        .unwrap()
    }

    fn batch() -> Vec<f64> {
        vec![0.1, 0.05, -0.2, 0.3, 0.25, -0.15, -0.1, -0.3, 0.4, 0.4]
    }

    #[test]
    fn schur_form_matches_direct_conditioning() {
        for family in [KernelFamily::Rbf, KernelFamily::Matern25] {
            let kernel = StationaryKernel::new(family, 0.8, 1.3).unwrap();
            let model = GpModel::new(kernel, 0.1).unwrap();
            let data = data_2d();
            let x = [0.05, 0.02];
            let post = GpPosterior::fit(model.clone(), data.clone()).unwrap();
            let la = GradientLookahead::new(&post, &x).unwrap();
            let direct = fantasized_grad_cov_trace(&model, &data, &x, &batch()).unwrap();
            assert!((la.value(&batch()).unwrap() - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (family, noise) in [(KernelFamily::Rbf, 0.1), (KernelFamily::Matern25, 0.3), (KernelFamily::Rbf, 0.0)] {
            let kernel = StationaryKernel::new(family, 0.9, 1.0).unwrap();
            let model = GpModel::new(kernel, noise).unwrap();
            let x = [0.05, 0.02];
            for data in [data_2d(), Dataset::new(2)] {
                let post = GpPosterior::fit(model.clone(), data).unwrap();
                let la = GradientLookahead::new(&post, &x).unwrap();
                let z = batch();
                let mut grad = vec![0.0; z.len()];
                la.value_and_grad(&z, &mut grad).unwrap();
                let h = 1e-6;
                for k in 0..z.len() {
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[k] += h;
                    zm[k] -= h;
                    let fd = (la.value(&zp).unwrap() - la.value(&zm).unwrap()) / (2.0 * h);
                    assert!((fd - grad[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{family:?} k={k}: fd={fd} an={}", grad[k]);
                }
            }
        }
    }

    #[test]
    fn empty_data_prior_limit() {
        let model = GpModel::new(StationaryKernel::unit(KernelFamily::Rbf), 0.1).unwrap();
        let far = vec![1e3; 7];
        let v = alpha_trace(&model, &Dataset::new(7), &[0.0; 7], &Design::new(7, far, super::super::Provenance::Random).unwrap()).unwrap();
        assert!((v - 7.0).abs() < 1e-12);
    }
}
