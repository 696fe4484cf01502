//! Local Bayesian optimization driven by the posterior uncertainty of the
//! gradient.
//!
//! The crate covers stationary kernels with analytic derivatives, GP
//! conditioning for values and gradients, the batch acquisition and its
//! minimizer, closed-form error bounds, random-feature sample paths, the
//! optimization loop and global baselines.

pub mod baselines;
pub mod design;
pub mod error;
pub mod gp;
pub mod kernel;
pub mod lbfgs;
pub mod linalg;
pub mod optimizer;
pub mod sampler;
pub mod stats;

/// Version of this crate, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use design::{Design, Provenance};
pub use error::{Error, Result};
pub use gp::{Dataset, GpModel, GpPosterior};
pub use kernel::{KernelFamily, Lengthscale, StationaryKernel};
pub use optimizer::{BatchSchedule, BoxDomain, RunConfig, RunTrace, StepMode};
pub use sampler::{draw_path, FunctionKind, SamplePath, TestFunction};
