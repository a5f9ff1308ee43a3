//! Command-line arguments and JSON config files.
//!
//! Every option is optional on the command line so that a `--config` file
//! can supply it; flags given explicitly win over the file, and anything
//! left unset falls back to the documented default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const DEFAULT_EPSILON: f64 = 1.0;
pub const DEFAULT_MU: f64 = 1e-4;
pub const DEFAULT_CV_FOLDS: usize = 10;
pub const DEFAULT_RANK_CAP: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "cure", version, about = "Co-sparse unit-rank factor regression")]
pub struct Cli {
    /// Worker threads [default: all cores]
    #[arg(long, global = true, env = "CURE_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset: writes X.csv, Y.csv and truth.json
    Simulate(SimulateArgs),
    /// Fit a model: writes model.json, report.csv and timing.csv
    Fit(FitArgs),
    /// Trace one stagewise solution path: writes path.jsonl
    Paths(PathsArgs),
    /// Score a fitted model against a truth: writes report.csv
    Eval(EvalArgs),
    /// Replicated simulation study: writes table.csv, reps.csv and timing.csv
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Seqstl,
    Seqacs,
    ParstlL,
    ParstlR,
    ParacsL,
    ParacsR,
    Rrr,
    Lasso,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Seqstl,
        Method::Seqacs,
        Method::ParstlL,
        Method::ParstlR,
        Method::ParacsL,
        Method::ParacsR,
        Method::Rrr,
        Method::Lasso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Seqstl => "seqstl",
            Method::Seqacs => "seqacs",
            Method::ParstlL => "parstl_l",
            Method::ParstlR => "parstl_r",
            Method::ParacsL => "paracs_l",
            Method::ParacsR => "paracs_r",
            Method::Rrr => "rrr",
            Method::Lasso => "lasso",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionArg {
    Gic,
    Aic,
    Bic,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    I,
    Ii,
    Iii,
}

/// Settings shared by every fitting command.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverArgs {
    /// Unit-rank stagewise step size epsilon [default: 1.0]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Stagewise tolerance xi [default: 1e-6 * epsilon^2]
    #[arg(long)]
    pub xi: Option<f64>,
    /// Ridge weight mu [default: 1e-4]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Tuning rule for each layer [default: gic]
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    /// Folds for --criterion cv and for RRR rank selection [default: 10]
    #[arg(long)]
    pub cv_folds: Option<usize>,
    /// Stop a path after this many steps without a new criterion minimum [default: 300]
    #[arg(long)]
    pub early_stop_window: Option<usize>,
    /// Cap on stagewise steps per path [default: 100000]
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Simulation model [default: i]
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Sample size [default: 40]
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of predictors [default: 40]
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of responses [default: 40]
    #[arg(long)]
    pub q: Option<usize>,
    /// True rank for models ii and iii [default: 3]
    #[arg(long)]
    pub true_rank: Option<usize>,
    /// Signal-to-noise ratio [default: 1.0]
    #[arg(long)]
    pub snr: Option<f64>,
    /// Correlation parameter of the design and noise [default: 0.3]
    #[arg(long)]
    pub rho: Option<f64>,
    /// Support size of each u in models ii and iii [default: 3]
    #[arg(long)]
    pub s_u: Option<usize>,
    /// Support size of each v in models ii and iii [default: 4]
    #[arg(long)]
    pub s_v: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimParams,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// JSON file with any of these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct FitArgs {
    /// Predictor matrix CSV
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Response matrix CSV; NA, NaN or empty fields are missing
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Estimation method
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Model rank [default: chosen by RRR cross-validation]
    #[arg(long)]
    pub rank: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    /// Also score the fit against this truth.json
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Seed for cross-validation folds [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory [default: .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// JSON file with any of these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsArgs {
    /// Predictor matrix CSV
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Response matrix CSV; NA, NaN or empty fields are missing
    #[arg(long)]
    pub y: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    /// Output directory [default: .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// JSON file with any of these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalArgs {
    /// model.json written by `fit`
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// truth.json written by `simulate`
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Predictor matrix CSV the truth was simulated with
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Output directory [default: .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// JSON file with any of these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimParams,
    /// Methods to compare [default: all]
    #[arg(long, value_enum, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    /// Rank for every method [default: the true rank]
    #[arg(long)]
    pub rank: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    /// Number of replications [default: 20]
    #[arg(long)]
    pub reps: Option<usize>,
    /// Base seed; replication i uses seed + i [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also report means after trimming this fraction from each end, e.g. 0.1
    #[arg(long)]
    pub trim: Option<f64>,
    /// Output directory [default: .]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// JSON file with any of these options
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Fills the options missing from `cli` with those in the JSON file at
/// `config`. Keys the command does not know are rejected.
pub fn merge_config<T>(cli: T, config: Option<&Path>) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned,
{
    let Some(path) = config else {
        return Ok(cli);
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let file: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let Value::Object(file) = file else {
        return Err(CliError::Usage(format!("{}: expected a JSON object", path.display())));
    };
    let Value::Object(mut merged) = serde_json::to_value(&cli).map_err(cure::Error::from)? else {
        unreachable!("argument structs serialize to objects");
    };
    for (key, value) in file {
        match merged.get_mut(&key) {
            Some(slot) if slot.is_null() => *slot = value,
            Some(_) => {}
            None => return Err(CliError::Usage(format!("{}: unknown option `{key}`", path.display()))),
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn required<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, CliError> {
    value.clone().ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}
