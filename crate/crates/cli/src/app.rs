//! Command-line surface and the driver shared by every subcommand.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{resolve, ConfigFile, ExperimentConfig};
use crate::error::CliError;
use crate::experiments::{bound_tables, error_function, fig1, rate_check, restarts, subgradient, Context, Outcome};
use crate::output::{versions, Manifest, OutputRecord, SCHEMA_VERSION};

#[derive(Debug, Clone, Parser)]
#[command(name = "lbo", version, about = "Local Bayesian optimization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML file with a table per experiment.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set trials=5` or
    /// `--set kernel.family=matern25`. Repeatable.
    #[arg(long = "set", global = true, value_name = "K=V")]
    pub sets: Vec<String>,

    /// Output directory [default: results/<command>].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Base seed [default: 0].
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Start from the full-scale grid instead of the desk-scale defaults.
    #[arg(long, global = true)]
    pub full: bool,

    /// Worker threads [default: available parallelism].
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Local solutions on sample paths against GP-UCB and random search.
    Fig1,
    /// Empirical error function against its analytic bound.
    ErrorFunction,
    /// Gradient-norm convergence against the theoretical rates.
    RateCheck,
    /// Multiple restarts on the same sample path.
    Restarts,
    /// Gradient estimates at kinks of nonsmooth objectives.
    Subgradient,
    /// Tabulated bounds and the inequalities between them.
    BoundTables,
}

impl Command {
    /// Name of the subcommand and of its configuration table.
    pub fn section(self) -> &'static str {
        match self {
            Command::Fig1 => "fig1",
            Command::ErrorFunction => "error-function",
            Command::RateCheck => "rate-check",
            Command::Restarts => "restarts",
            Command::Subgradient => "subgradient",
            Command::BoundTables => "bound-tables",
        }
    }

    pub fn experiment(self) -> &'static str {
        match self {
            Command::Fig1 => "Fig1Boxplots",
            Command::ErrorFunction => "ErrorFunctionSweep",
            Command::RateCheck => "RateCheck",
            Command::Restarts => "Restarts",
            Command::Subgradient => "Subgradient",
            Command::BoundTables => "BoundTables",
        }
    }
}

/// What a successful run wrote.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

fn run_experiment<T: ExperimentConfig>(
    file: Option<&ConfigFile>,
    cli: &Cli,
    ctx: &Context<'_>,
    body: fn(&T, &Context<'_>) -> Result<Outcome, CliError>,
) -> Result<(serde_json::Value, Outcome), CliError> {
    let cfg: T = resolve(file, cli.full, &cli.sets)?;
    let echo = to_json(&cfg)?;
    Ok((echo, body(&cfg, ctx)?))
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Config(e.to_string()))
}

/// Runs one subcommand end to end: resolve the configuration, run the
/// trials, write the tables and `manifest.json`.
///
/// Trials that fail numerically are recorded in the tables and the
/// manifest; the call then returns [`CliError::Numerical`] after writing.
pub fn execute(cli: &Cli) -> Result<RunSummary, CliError> {
    let start = Instant::now();
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let global = file.as_ref().map(|f| f.global.clone()).unwrap_or_default();
    let seed = cli.seed.or(global.seed).unwrap_or(0);
    let jobs = cli.jobs.or(global.jobs).unwrap_or_else(default_jobs);
    if jobs == 0 {
        return Err(CliError::Config("jobs must be at least 1".into()));
    }
    let out_dir = cli
        .out
        .clone()
        .or(global.out)
        .unwrap_or_else(|| PathBuf::from("results").join(cli.command.section()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let ctx = Context { seed, pool: &pool };
    let file = file.as_ref();

    let (config, outcome) = match cli.command {
        Command::Fig1 => run_experiment::<fig1::Fig1Config>(file, cli, &ctx, fig1::run)?,
        Command::ErrorFunction => run_experiment::<error_function::ErrorFunctionConfig>(file, cli, &ctx, error_function::run)?,
        Command::RateCheck => run_experiment::<rate_check::RateCheckConfig>(file, cli, &ctx, rate_check::run)?,
        Command::Restarts => run_experiment::<restarts::RestartsConfig>(file, cli, &ctx, restarts::run)?,
        Command::Subgradient => run_experiment::<subgradient::SubgradientConfig>(file, cli, &ctx, subgradient::run)?,
        Command::BoundTables => run_experiment::<bound_tables::BoundTablesConfig>(file, cli, &ctx, bound_tables::run)?,
    };

    std::fs::create_dir_all(&out_dir)?;
    let mut files = Vec::new();
    let mut outputs = Vec::new();
    for mut table in outcome.tables {
        files.push(table.write(&out_dir)?);
        outputs.push(OutputRecord {
            file: table.file_name(),
            columns: table.columns.clone(),
            rows: table.rows.len(),
        });
    }
    let manifest = Manifest {
        command: cli.command.section().to_string(),
        experiment: cli.command.experiment().to_string(),
        schema_version: SCHEMA_VERSION,
        seed,
        jobs,
        full: cli.full,
        config,
        versions: versions(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs,
        numerical_failures: outcome.failures.clone(),
    };
    files.push(manifest.write(&out_dir)?);

    if !outcome.failures.is_empty() {
        return Err(CliError::Numerical(format!(
            "{} trial(s) failed, first: {}; results written to {}",
            outcome.failures.len(),
            outcome.failures[0],
            out_dir.display()
        )));
    }
    Ok(RunSummary { out_dir, files })
}
