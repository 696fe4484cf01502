//! Query designs for gradient estimation: the trace acquisition, its
//! minimizer, the error function and its analytic bounds.

pub mod acquisition;
pub mod bounds;
pub mod lambert;
pub mod minimize;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use acquisition::{alpha_trace, GradientLookahead};
pub use bounds::{
    bound_matern, bound_matern_batch, bound_noiseless, bound_rbf_lambert, bound_rbf_taylor, central_trace_bound,
    error_bound_upper, forward_trace_bound, gaussian_norm_tail_bound, DifferencingConstants,
};
pub use lambert::lambert_w0;
pub use minimize::{
    error_function_design, error_function_empirical, minimize_acquisition, minimize_on_posterior, GradientMode,
    MinimizerConfig, OptimizedDesign,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Optimized,
    Central { m: usize, h: f64 },
    Forward { m: usize, h: f64 },
    /// Pairs spread over the axes as evenly as possible; used when the batch
    /// size is not a multiple of `2d`.
    CentralAllocated { b: usize },
    ForwardAllocated { b: usize },
    Random,
}

/// A batch of `b` candidate query locations in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    dim: usize,
    rows: Vec<f64>,
    provenance: Provenance,
}

impl Design {
    pub fn new(dim: usize, rows: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if dim == 0 || rows.len() % dim != 0 {
            return Err(invalid("rows", "design buffer must hold whole rows of a nonzero dimension"));
        }
        Ok(Self { dim, rows, provenance })
    }

    /// `2md` points: `m` copies of `x ± h·eᵢ` on every axis.
    pub fn central(center: &[f64], m: usize, h: f64) -> Self {
        let d = center.len();
        let mut rows = Vec::with_capacity(2 * m * d * d);
        for i in 0..d {
            for sign in [-1.0, 1.0] {
                for _ in 0..m {
                    let mut p = center.to_vec();
                    p[i] += sign * h;
                    rows.extend_from_slice(&p);
                }
            }
        }
        Self {
            dim: d,
            rows,
            provenance: Provenance::Central { m, h },
        }
    }

    /// `(d + 1)m` points: `m` copies of `x` and of `x + h·eᵢ` on every axis.
    pub fn forward(center: &[f64], m: usize, h: f64) -> Self {
        let d = center.len();
        let mut rows = Vec::with_capacity((d + 1) * m * d);
        for _ in 0..m {
            rows.extend_from_slice(center);
        }
        for i in 0..d {
            for _ in 0..m {
                let mut p = center.to_vec();
                p[i] += h;
                rows.extend_from_slice(&p);
            }
        }
        Self {
            dim: d,
            rows,
            provenance: Provenance::Forward { m, h },
        }
    }

    /// Central pattern with exactly `b` rows: `⌊b/2⌋` symmetric pairs spread
    /// round-robin over the axes (see [`pair_allocation`]), with a leftover
    /// point at the center when `b` is odd. `steps[i]` is the offset on axis `i`.
    pub fn central_allocated(center: &[f64], b: usize, steps: &[f64]) -> Self {
        let d = center.len();
        let counts = pair_allocation(d, b);
        let mut rows = Vec::with_capacity(b * d);
        for (i, &m) in counts.iter().enumerate() {
            for sign in [-1.0, 1.0] {
                for _ in 0..m {
                    let mut p = center.to_vec();
                    p[i] += sign * steps[i];
                    rows.extend_from_slice(&p);
                }
            }
        }
        if b % 2 == 1 {
            rows.extend_from_slice(center);
        }
        Self {
            dim: d,
            rows,
            provenance: Provenance::CentralAllocated { b },
        }
    }

    /// Forward pattern with exactly `b` rows: copies of the center and of
    /// `x + steps[i]·eᵢ`, cycling center, axis 1, …, axis d.
    pub fn forward_allocated(center: &[f64], b: usize, steps: &[f64]) -> Self {
        let d = center.len();
        let mut rows = Vec::with_capacity(b * d);
        for k in 0..b {
            let mut p = center.to_vec();
            let slot = k % (d + 1);
            if slot > 0 {
                p[slot - 1] += steps[slot - 1];
            }
            rows.extend_from_slice(&p);
        }
        Self {
            dim: d,
            rows,
            provenance: Provenance::ForwardAllocated { b },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Batch size `b`.
    pub fn len(&self) -> usize {
        self.rows.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn into_rows(self) -> Vec<f64> {
        self.rows
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.rows)
    }
}

/// Number of symmetric pairs per axis when `⌊b/2⌋` pairs are dealt
/// round-robin over `d` axes.
pub fn pair_allocation(d: usize, b: usize) -> Vec<usize> {
    let pairs = b / 2;
    (0..d).map(|i| pairs / d + usize::from(i < pairs % d)).collect()
}
