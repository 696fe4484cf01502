//! Gaussian-process conditioning for function values and gradients.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Result};
use crate::kernel::StationaryKernel;
use crate::linalg::JitteredCholesky;

/// Observations `(X, y)`, with `X` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn from_rows(dim: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if x.len() % dim != 0 {
            return Err(invalid("x", "length is not a multiple of the dimension"));
        }
        check_dim(x.len() / dim, y.len())?;
        Ok(Self { dim, x, y })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_dim(self.dim, x.len())?;
        self.x.extend_from_slice(x);
        self.y.push(y);
        Ok(())
    }

    /// Appends a batch of row-major inputs with their labels.
    pub fn extend(&mut self, rows: &[f64], ys: &[f64]) -> Result<()> {
        if rows.len() != ys.len() * self.dim {
            return Err(invalid("rows", "batch shape does not match labels"));
        }
        self.x.extend_from_slice(rows);
        self.y.extend_from_slice(ys);
        Ok(())
    }

    /// The last `count` observations.
    pub fn tail(&self, count: usize) -> Dataset {
        let start = self.len().saturating_sub(count);
        Dataset {
            dim: self.dim,
            x: self.x[start * self.dim..].to_vec(),
            y: self.y[start..].to_vec(),
        }
    }

    /// Same inputs, new labels.
    pub fn relabel(&self, y: Vec<f64>) -> Result<Dataset> {
        check_dim(self.len(), y.len())?;
        Ok(Dataset {
            dim: self.dim,
            x: self.x.clone(),
            y,
        })
    }
}

/// Prior specification: kernel, constant mean, observation noise and base jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    pub kernel: StationaryKernel,
    pub mean: f64,
    pub noise_sd: f64,
    /// First rung of the jitter ladder, in units of the outputscale.
    pub jitter: f64,
}

impl GpModel {
    pub fn new(kernel: StationaryKernel, noise_sd: f64) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(invalid("noise_sd", format!("must be nonnegative, got {noise_sd}")));
        }
        Ok(Self {
            kernel,
            mean: 0.0,
            noise_sd,
            jitter: 1e-10,
        })
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.mean = mean;
        self
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_sd * self.noise_sd
    }

    pub(crate) fn base_jitter(&self) -> f64 {
        self.jitter * self.kernel.outputscale()
    }
}

/// A GP conditioned on a dataset.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    model: GpModel,
    data: Dataset,
    chol: JitteredCholesky,
    alpha: DVector<f64>,
}

impl GpPosterior {
    pub fn fit(model: GpModel, data: Dataset) -> Result<Self> {
        model.kernel.check_input_dim(data.dim())?;
        let chol = if data.is_empty() {
            JitteredCholesky::empty(model.noise_var(), 0.0)
        } else {
            let k = model.kernel.gram(data.x(), data.dim());
            JitteredCholesky::factor(&k, model.noise_var(), model.base_jitter())?
        };
        let mut post = Self {
            model,
            data,
            chol,
            alpha: DVector::zeros(0),
        };
        post.refresh_alpha();
        Ok(post)
    }

    fn refresh_alpha(&mut self) {
        let resid = DVector::from_iterator(self.data.len(), self.data.y().iter().map(|y| y - self.model.mean));
        self.alpha = self.chol.solve_vec(&resid);
    }

    /// Adds observations, extending the factorization when possible and
    /// refactoring from scratch otherwise.
    pub fn append(&mut self, rows: &[f64], ys: &[f64]) -> Result<()> {
        let d = self.data.dim();
        let n = self.data.len();
        self.data.extend(rows, ys)?;
        let m = ys.len();
        if m == 0 {
            return Ok(());
        }
        let kern = &self.model.kernel;
        let extended = n > 0 && {
            let k12 = DMatrix::from_fn(n, m, |i, j| kern.k(self.data.row(i), self.data.row(n + j)));
            let k22 = kern.gram(&self.data.x()[n * d..], d);
            self.chol.extend(&k12, &k22)
        };
        if !extended {
            let k = kern.gram(self.data.x(), d);
            self.chol = JitteredCholesky::factor_from(&k, self.model.noise_var(), self.model.base_jitter(), self.chol.jitter())?;
        }
        self.refresh_alpha();
        Ok(())
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn chol(&self) -> &JitteredCholesky {
        &self.chol
    }

    /// Jitter that was needed to factor the training covariance.
    pub fn jitter(&self) -> f64 {
        self.chol.jitter()
    }

    /// `(K + σ²I)⁻¹(y − μ)`.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    fn cross_cov(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.data.len(),
            (0..self.data.len()).map(|i| self.model.kernel.k(x, self.data.row(i))),
        )
    }

    /// Rows `∇₁k(x, xᵢ)` for every training input: an n×d matrix.
    pub fn grad_cross_cov(&self, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        let n = self.data.len();
        let mut g = DMatrix::zeros(n, d);
        let mut buf = vec![0.0; d];
        for i in 0..n {
            self.model.kernel.k_and_grad1_into(x, self.data.row(i), &mut buf);
            for c in 0..d {
                g[(i, c)] = buf[c];
            }
        }
        g
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        check_dim(self.data.dim(), x.len())
    }

    pub fn mean(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.model.mean + self.cross_cov(x).dot(&self.alpha))
    }

    pub fn variance(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let v = self.chol.solve_lower_vec(&self.cross_cov(x));
        Ok(self.model.kernel.outputscale() - v.norm_squared())
    }

    /// `∇μ_D(x)`.
    pub fn mean_grad(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_point(x)?;
        let d = x.len();
        let mut out = DVector::zeros(d);
        let mut buf = vec![0.0; d];
        for i in 0..self.data.len() {
            self.model.kernel.k_and_grad1_into(x, self.data.row(i), &mut buf);
            for c in 0..d {
                out[c] += buf[c] * self.alpha[i];
            }
        }
        Ok(out)
    }

    /// `∇k_D(x, x)∇ᵀ`.
    pub fn grad_cov(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let prior = self.model.kernel.cross_hessian(x, x)?;
        if self.data.is_empty() {
            return Ok(prior);
        }
        let v = self.chol.solve_lower(&self.grad_cross_cov(x));
        Ok(prior - v.transpose() * v)
    }

    /// Mean and covariance of `∇f(x) | D`.
    pub fn grad_posterior(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((self.mean_grad(x)?, self.grad_cov(x)?))
    }

    /// `tr(∇k_D(x, x)∇ᵀ)`.
    pub fn grad_cov_trace(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let prior = self.model.kernel.prior_grad_trace(x.len());
        if self.data.is_empty() {
            return Ok(prior);
        }
        let v = self.chol.solve_lower(&self.grad_cross_cov(x));
        Ok(prior - v.norm_squared())
    }

    /// Mean, variance and their gradients at `x`.
    pub fn moments_with_grads(&self, x: &[f64]) -> Result<(f64, DVector<f64>, f64, DVector<f64>)> {
        self.check_point(x)?;
        let kx = self.cross_cov(x);
        let g = self.grad_cross_cov(x);
        let mean = self.model.mean + kx.dot(&self.alpha);
        let mean_grad = g.transpose() * &self.alpha;
        let v = self.chol.solve_lower_vec(&kx);
        let var = self.model.kernel.outputscale() - v.norm_squared();
        let w = self.chol.solve_upper_vec(&v);
        let var_grad = g.transpose() * w * -2.0;
        Ok((mean, mean_grad, var, var_grad))
    }
}

/// `μ_D(x)`.
pub fn posterior_mean(model: &GpModel, data: &Dataset, x: &[f64]) -> Result<f64> {
    GpPosterior::fit(model.clone(), data.clone())?.mean(x)
}

/// `(∇μ_D(x), ∇k_D(x, x)∇ᵀ)`.
pub fn grad_posterior(model: &GpModel, data: &Dataset, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    GpPosterior::fit(model.clone(), data.clone())?.grad_posterior(x)
}

/// `tr(∇k_{D∪Z}(x, x)∇ᵀ)` by direct conditioning on `D ∪ Z` with placeholder
/// labels; the posterior covariance does not depend on them.
pub fn fantasized_grad_cov_trace(model: &GpModel, data: &Dataset, x: &[f64], z_rows: &[f64]) -> Result<f64> {
    let mut joint = data.clone();
    let b = z_rows.len() / data.dim().max(1);
    joint.extend(z_rows, &vec![0.0; b])?;
    GpPosterior::fit(model.clone(), joint)?.grad_cov_trace(x)
}
