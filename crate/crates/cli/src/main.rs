//! `extremal-fields`: runs limit-law evaluations and Monte Carlo experiments
//! from JSON configs and writes JSON/CSV reports.

mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use extremal_fields::limit_law::{limit_cdf, mixed_gumbel_cdf, LimitLawParams, QuadratureSpec};
use extremal_fields::montecarlo::{
    config_hash, convergence_study, corollary_experiments, estimate_sup_cdf, lemma_sums, piterbarg_tail_check,
    CorollaryConfig, LemmaSumConfig, SupExperimentConfig, TailCheckConfig,
};
use extremal_fields::pickands::{estimate_pickands, PickandsConfig};

use crate::error::CliError;
use crate::output::{Artifacts, Metadata};

/// Environment variable consulted for the seed when neither `--seed` nor the
/// config sets one.
pub const SEED_ENV: &str = "EXTREMAL_FIELDS_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "extremal-fields",
    version,
    about = "Extremes of stationary Gaussian random fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config and the environment.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output path prefix; reports go to stdout when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Overrides one scalar leaf, e.g. `--set quadrature.node_count=32`.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Monte Carlo estimate of a Pickands constant.
    Pickands,
    /// The limit law at `(x, λ(J), R, γ)` or at an intensity `c`.
    LimitCdf,
    /// Empirical `P(sup ≤ u)` over scaled sets.
    SimulateSup,
    /// Convergence study against the limit law.
    Converge,
    /// Empirical tail of the sup against the Pickands asymptotic.
    TailCheck,
    /// Deterministic lemma sums over a threshold ladder.
    LemmaSums,
    /// Fast and slow side-scaling regimes.
    Corollary,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Pickands => "pickands",
            Command::LimitCdf => "limit-cdf",
            Command::SimulateSup => "simulate-sup",
            Command::Converge => "converge",
            Command::TailCheck => "tail-check",
            Command::LemmaSums => "lemma-sums",
            Command::Corollary => "corollary",
        }
    }

    /// Where the master seed and the worker count live in the config tree.
    fn seed_path(self) -> Option<&'static str> {
        match self {
            Command::LemmaSums => None,
            Command::LimitCdf => Some("quadrature.seed"),
            Command::Corollary => Some("base.seed"),
            _ => Some("seed"),
        }
    }

    fn workers_path(self) -> Option<&'static str> {
        match self {
            Command::LemmaSums | Command::LimitCdf => None,
            Command::Corollary => Some("base.workers"),
            _ => Some("workers"),
        }
    }
}

fn default_gamma() -> f64 {
    0.25
}

/// Either `c` or both `x` and `lambda_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitCdfConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(rename = "R", default)]
    r: f64,
    #[serde(default = "default_gamma")]
    gamma: f64,
    #[serde(default)]
    quadrature: QuadratureSpec,
}

fn parse<T: DeserializeOwned + Serialize>(command: Command, tree: Value) -> Result<(T, Value), CliError> {
    let parsed: T = serde_json::from_value(tree)
        .map_err(|e| CliError::Validation(format!("invalid {} config: {e}", command.name())))?;
    let resolved = serde_json::to_value(&parsed)?;
    Ok((parsed, resolved))
}

fn resolve_tree(cli: &Cli) -> Result<Value, CliError> {
    let mut tree = config::load(cli.config.as_deref())?;
    for assignment in &cli.overrides {
        config::apply_override(&mut tree, assignment)?;
    }
    if let Some(path) = cli.command.seed_path() {
        let seed = match cli.seed {
            Some(s) => Some(s),
            None if config::get_path(&tree, path).is_none() => match std::env::var(SEED_ENV) {
                Ok(raw) => Some(raw.trim().parse::<u64>().map_err(|_| {
                    CliError::Validation(format!("{SEED_ENV} must be an unsigned 64-bit integer, got {raw:?}"))
                })?),
                Err(_) => None,
            },
            None => None,
        };
        if let Some(seed) = seed {
            config::set_scalar(&mut tree, path, Value::from(seed))?;
        }
    }
    if let (Some(path), Some(w)) = (cli.command.workers_path(), cli.workers) {
        config::set_scalar(&mut tree, path, Value::from(w))?;
    }
    Ok(tree)
}

/// Clears execution-only settings; the worker count goes to the metadata.
fn normalize(command: Command, mut resolved: Value) -> Result<Value, CliError> {
    if let Some(path) = command.workers_path() {
        config::set_scalar(&mut resolved, path, Value::from(0))?;
    }
    Ok(resolved)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let tree = resolve_tree(cli)?;
    let command = cli.command;
    let mut csv = Vec::new();
    let (resolved, result) = match command {
        Command::Pickands => {
            let (cfg, resolved) = parse::<PickandsConfig>(command, tree)?;
            let est = estimate_pickands(&cfg)?;
            csv.push((
                "",
                format!(
                    "alpha,value,std_error,replicates,method\n{},{},{},{},{}\n",
                    est.alpha,
                    est.value,
                    est.std_error,
                    est.replicates,
                    serde_json::to_value(est.method)?.as_str().unwrap_or_default()
                ),
            ));
            (resolved, serde_json::to_value(est)?)
        }
        Command::LimitCdf => {
            let (cfg, resolved) = parse::<LimitCdfConfig>(command, tree)?;
            let value = match (&cfg.c, &cfg.x, &cfg.lambda_j) {
                (Some(c), None, None) => mixed_gumbel_cdf(*c, cfg.r, cfg.gamma, &cfg.quadrature)?,
                (None, Some(x), Some(l)) => {
                    limit_cdf(&LimitLawParams::new(x.clone(), *l, cfg.r, cfg.gamma)?, &cfg.quadrature)?
                }
                _ => {
                    return Err(CliError::Validation(
                        "limit-cdf needs either c, or both x and lambda_j".into(),
                    ))
                }
            };
            csv.push((
                "",
                format!(
                    "value,std_error,method,intensity\n{},{},{},{}\n",
                    value.value,
                    value.std_error.map(|s| s.to_string()).unwrap_or_default(),
                    serde_json::to_value(value.method)?.as_str().unwrap_or_default(),
                    value.intensity
                ),
            ));
            (resolved, serde_json::to_value(value)?)
        }
        Command::SimulateSup | Command::Converge => {
            let (cfg, resolved) = parse::<SupExperimentConfig>(command, tree)?;
            let report = if command == Command::SimulateSup {
                estimate_sup_cdf(&cfg)?
            } else {
                convergence_study(&cfg)?
            };
            csv.push(("", report.to_csv()));
            (resolved, serde_json::to_value(report)?)
        }
        Command::TailCheck => {
            let (cfg, resolved) = parse::<TailCheckConfig>(command, tree)?;
            let report = piterbarg_tail_check(&cfg)?;
            let mut table = String::from("u,empirical,ci_low,ci_high,theory,ratio,exceedances,n\n");
            for r in &report.records {
                table.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.u, r.empirical, r.ci_low, r.ci_high, r.theory, r.ratio, r.exceedances, r.replicates
                ));
            }
            csv.push(("", table));
            (resolved, serde_json::to_value(report)?)
        }
        Command::LemmaSums => {
            let (cfg, resolved) = parse::<LemmaSumConfig>(command, tree)?;
            let report = lemma_sums(&cfg)?;
            let mut table = String::from("u,sum,max_term,near_sum,far_sum,evaluated_points,stride\n");
            for t in &report.terms {
                table.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    t.u, t.sum, t.max_term, t.near_sum, t.far_sum, t.evaluated_points, t.stride
                ));
            }
            csv.push(("", table));
            (resolved, serde_json::to_value(report)?)
        }
        Command::Corollary => {
            let (cfg, resolved) = parse::<CorollaryConfig>(command, tree)?;
            let report = corollary_experiments(&cfg)?;
            csv.push(("", report.main.to_csv()));
            if let Some(control) = &report.control {
                csv.push(("control", control.to_csv()));
            }
            (resolved, serde_json::to_value(report)?)
        }
    };
    let resolved = normalize(command, resolved)?;
    let artifacts = Artifacts {
        command: command.name(),
        config_hash: config_hash(&resolved)?,
        config: resolved,
        result,
        csv,
    };
    let metadata = Metadata::new(command.name(), start, cli.workers);
    artifacts.emit(cli.output.as_deref(), cli.format, &metadata)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
