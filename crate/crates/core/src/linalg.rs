//! Cholesky factorization of `K + (σ² + jitter)·I` with an escalating jitter
//! ladder, plus block extension when rows are appended.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Multipliers applied to the base jitter on successive factorization attempts.
pub const JITTER_STEPS: [f64; 3] = [1.0, 1e2, 1e4];

#[derive(Debug, Clone)]
pub struct JitteredCholesky {
    l: DMatrix<f64>,
    noise_var: f64,
    jitter: f64,
}

impl JitteredCholesky {
    /// Factors `k + (noise_var + j)·I` for the first `j` on the ladder that
    /// succeeds. With positive noise the unjittered matrix is tried first.
    pub fn factor(k: &DMatrix<f64>, noise_var: f64, base_jitter: f64) -> Result<Self> {
        Self::factor_from(k, noise_var, base_jitter, 0.0)
    }

    /// Like [`factor`](Self::factor) but never uses a jitter below `floor`.
    pub fn factor_from(k: &DMatrix<f64>, noise_var: f64, base_jitter: f64, floor: f64) -> Result<Self> {
        let n = k.nrows();
        let mut rungs = Vec::with_capacity(4);
        if noise_var > 0.0 && floor <= 0.0 {
            rungs.push(0.0);
        }
        rungs.extend(JITTER_STEPS.iter().map(|s| s * base_jitter).filter(|j| *j >= floor));
        let mut last = 0.0;
        for jitter in rungs {
            last = jitter;
            let mut m = k.clone();
            for i in 0..n {
                m[(i, i)] += noise_var + jitter;
            }
            if let Some(ch) = Cholesky::new(m) {
                return Ok(Self {
                    l: ch.unpack(),
                    noise_var,
                    jitter,
                });
            }
        }
        Err(Error::Conditioning { size: n, jitter: last })
    }

    pub fn empty(noise_var: f64, jitter: f64) -> Self {
        Self {
            l: DMatrix::zeros(0, 0),
            noise_var,
            jitter,
        }
    }

    pub fn size(&self) -> usize {
        self.l.nrows()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Total diagonal shift `σ² + jitter`.
    pub fn diagonal_shift(&self) -> f64 {
        self.noise_var + self.jitter
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Appends rows with cross-covariance `k12` (n×m) and block `k22` (m×m)
    /// at the current jitter. Returns `false`, leaving `self` unchanged, when
    /// the Schur complement is not positive definite.
    pub fn extend(&mut self, k12: &DMatrix<f64>, k22: &DMatrix<f64>) -> bool {
        let n = self.size();
        let m = k22.nrows();
        let l21t = self.solve_lower(k12);
        let mut s = k22 - l21t.transpose() * &l21t;
        for i in 0..m {
            s[(i, i)] += self.diagonal_shift();
        }
        let Some(ch) = Cholesky::new(s) else {
            return false;
        };
        let l22 = ch.unpack();
        let mut l = DMatrix::zeros(n + m, n + m);
        l.view_mut((0, 0), (n, n)).copy_from(&self.l);
        l.view_mut((n, 0), (m, n)).copy_from(&l21t.transpose());
        l.view_mut((n, n), (m, m)).copy_from(&l22);
        self.l = l;
        true
    }

    /// `L⁻¹ b`.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        if self.size() > 0 {
            self.l.solve_lower_triangular_mut(&mut x);
        }
        x
    }

    pub fn solve_lower_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        if self.size() > 0 {
            self.l.solve_lower_triangular_mut(&mut x);
        }
        x
    }

    /// `L⁻ᵀ b`.
    pub fn solve_upper(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        if self.size() > 0 {
            self.l.tr_solve_lower_triangular_mut(&mut x);
        }
        x
    }

    pub fn solve_upper_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        if self.size() > 0 {
            self.l.tr_solve_lower_triangular_mut(&mut x);
        }
        x
    }

    /// `(K + shift·I)⁻¹ b`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solve_upper_vec(&self.solve_lower_vec(b))
    }
}
