//! What the posterior mean gradient learns at a kink: designs chosen by the
//! acquisition, noisy queries, and the resulting `∇μ_D(x)`.

use lbo_core::design::{minimize_acquisition, MinimizerConfig};
use lbo_core::{Dataset, FunctionKind, GpModel, GpPosterior, KernelFamily, TestFunction};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_sigmas, Context, KernelSpec, Outcome};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{Cell, Table};
use crate::seeds::{stream, trial_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `max(0, x)`, one-dimensional.
    Relu,
    /// `‖x‖₁`.
    L1,
    /// `½‖x‖²`, the smooth control.
    Quadratic,
}

impl Objective {
    fn kind(self) -> FunctionKind {
        match self {
            Objective::Relu => FunctionKind::Relu1d,
            Objective::L1 => FunctionKind::L1Norm,
            Objective::Quadratic => FunctionKind::Quadratic,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Objective::Relu => "relu",
            Objective::L1 => "l1",
            Objective::Quadratic => "quadratic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub function: Objective,
    /// Where the gradient is estimated.
    pub x: Vec<f64>,
    /// Number of queries.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubgradientConfig {
    pub kernel: KernelSpec,
    pub sigma: f64,
    pub trials: usize,
    pub cases: Vec<Case>,
    pub minimizer: MinimizerConfig,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig for SubgradientConfig {
    const SECTION: &'static str = "subgradient";

    fn desk() -> Self {
        let case = |function, x: &[f64], n| Case {
            function,
            x: x.to_vec(),
            n,
        };
        Self {
            kernel: KernelSpec::unit(KernelFamily::Rbf),
            sigma: 0.01,
            trials: 10,
            cases: vec![
                case(Objective::Relu, &[0.0], 2),
                case(Objective::Relu, &[0.0], 4),
                case(Objective::Quadratic, &[0.0, 1.0], 5),
                case(Objective::L1, &[0.0, 1.0], 5),
                case(Objective::L1, &[0.0, 1.0], 10),
            ],
            minimizer: MinimizerConfig::default(),
        }
    }

    fn full() -> Self {
        Self {
            trials: 50,
            ..Self::desk()
        }
    }

    fn validate(&self) -> Result<(), String> {
        check_sigmas(&[self.sigma])?;
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        for (i, c) in self.cases.iter().enumerate() {
            if c.n == 0 {
                return Err(format!("cases[{i}].n must be at least 1"));
            }
            if c.x.is_empty() || c.x.len() > 2 {
                return Err(format!("cases[{i}].x must have one or two coordinates"));
            }
            if c.function == Objective::Relu && c.x.len() != 1 {
                return Err(format!("cases[{i}]: relu is one-dimensional"));
            }
        }
        Ok(())
    }
}

pub const COLUMNS: [&str; 10] = ["case", "function", "n", "trial", "seed", "dim", "g1", "g2", "distance", "acquisition"];
pub const QUERY_COLUMNS: [&str; 6] = ["case", "trial", "query", "z1", "z2", "y"];

struct Estimate {
    seed: u64,
    grad: Vec<f64>,
    distance: f64,
    acquisition: f64,
    queries: Vec<(Vec<f64>, f64)>,
}

pub fn run(cfg: &SubgradientConfig, ctx: &Context<'_>) -> Result<Outcome, CliError> {
    let kernel = cfg.kernel.build()?;
    let model = GpModel::new(kernel, cfg.sigma)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.cases.len()).flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
    let results = ctx.map(&jobs, |&(c, t)| -> Result<Estimate, CliError> {
        let case = &cfg.cases[c];
        let d = case.x.len();
        let seed = stream(trial_seed(ctx.seed, "subgradient", d, cfg.sigma, t), &format!("case-{c}"));
        let func = TestFunction::new(case.function.kind(), cfg.sigma)?;
        let mcfg = MinimizerConfig {
            seed: stream(seed, "design"),
            ..cfg.minimizer.clone()
        };
        let design = minimize_acquisition(&model, &Dataset::new(d), &case.x, case.n, &mcfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream(seed, "noise"));
        let rows = design.design.rows().to_vec();
        let ys = rows.chunks(d).map(|z| func.query(z, &mut rng)).collect::<Result<Vec<f64>, _>>()?;
        let post = GpPosterior::fit(model.clone(), Dataset::from_rows(d, rows.clone(), ys.clone())?)?;
        let grad: Vec<f64> = post.mean_grad(&case.x)?.iter().copied().collect();
        let distance = func.subdifferential_distance(&case.x, &grad)?;
        Ok(Estimate {
            seed,
            grad,
            distance,
            acquisition: design.value,
            queries: rows.chunks(d).map(<[f64]>::to_vec).zip(ys).collect(),
        })
    });

    let mut table = Table::new("subgradient", &COLUMNS, 4);
    let mut queries = Table::new("subgradient_queries", &QUERY_COLUMNS, 3);
    for (&(c, t), r) in jobs.iter().zip(results) {
        let r = r?;
        let case = &cfg.cases[c];
        table.push(vec![
            c.into(),
            case.function.name().into(),
            case.n.into(),
            t.into(),
            r.seed.into(),
            case.x.len().into(),
            r.grad[0].into(),
            r.grad.get(1).copied().into(),
            r.distance.into(),
            r.acquisition.into(),
        ]);
        for (q, (z, y)) in r.queries.iter().enumerate() {
            let z2: Cell = z.get(1).copied().into();
            queries.push(vec![c.into(), t.into(), q.into(), z[0].into(), z2, (*y).into()]);
        }
    }
    Ok(Outcome {
        tables: vec![table, queries],
        failures: Vec::new(),
    })
}
