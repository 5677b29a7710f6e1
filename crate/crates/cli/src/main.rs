mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pgce::Error;

#[derive(Parser, Debug)]
#[command(name = "pgce", version, about = "Principal generalized causal effect estimation")]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, env = "PGCE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate stratum effects on a CSV dataset.
    Estimate(EstimateArgs),
    /// Run a simulation scenario (or a grid of scenarios).
    Simulate(SimulateArgs),
    /// Sensitivity analysis over a grid of monotonicity violations.
    Sensitivity(SensitivityArgs),
    /// Monte Carlo truth of an estimand under a built-in DGP.
    Oracle(OracleArgs),
}

/// Options shared by `estimate` and `sensitivity`; flags override the config.
#[derive(Args, Debug)]
pub struct RunArgs {
    /// Input CSV with columns x1..xp, z, d, y.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSON run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `continuous` or `ordinal:Q`.
    #[arg(long)]
    pub outcome_kind: Option<String>,
    /// Comma-separated strata (10, 00, 11, 01).
    #[arg(long, value_delimiter = ',')]
    pub stratum: Vec<String>,
    /// difference, geq or win_pair.
    #[arg(long)]
    pub contrast: Option<String>,
    /// raw, win_ratio or win_difference.
    #[arg(long)]
    pub summary: Option<String>,
    /// Bootstrap replicates (enables the bootstrap).
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Folds for cross-fitting.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Learner kind for every nuisance component.
    #[arg(long)]
    pub learner: Option<String>,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Per-replicate bootstrap estimates, as CSV.
    #[arg(long)]
    pub replicates_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated estimators (m1, m2, m3, tr, dml).
    #[arg(long, value_delimiter = ',')]
    pub estimator: Vec<String>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    pub format: String,
}

#[derive(Args, Debug)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated eta0 grid.
    #[arg(long, value_delimiter = ',')]
    pub eta0: Vec<f64>,
    /// constant or proportional.
    #[arg(long)]
    pub form: Option<String>,
    /// tr or dml.
    #[arg(long)]
    pub estimator: Option<String>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON scenario config; `scenarios` may list several labels.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replication rows go here (stdout otherwise).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Aggregates (mean, sd, bias, rmse) as CSV.
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    /// gaussian, gaussian-null-x or ordinal.
    #[arg(long)]
    pub dgp: String,
    #[arg(long)]
    pub stratum: String,
    #[arg(long, default_value = "difference")]
    pub contrast: String,
    #[arg(long, default_value = "raw")]
    pub summary: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub eta0: f64,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// Process exit codes.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::UnknownLearner(_)
        | Error::LearnerConfig { .. }
        | Error::SummaryDimension { .. }
        | Error::BadK { .. }
        | Error::TooFewReplicates(_) => 2,
        Error::Io(_) => 3,
        Error::Parse(_)
        | Error::EmptyDataset
        | Error::InvalidBinary { .. }
        | Error::UndefinedOutcomeWithD1 { .. }
        | Error::DimensionMismatch { .. }
        | Error::InvalidCategory { .. }
        | Error::NonFiniteValue { .. } => 4,
        _ => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot start {t} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sensitivity(a) => commands::sensitivity(a),
        Command::Oracle(a) => commands::oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let kind = match code {
                2 => "config",
                3 => "io",
                4 => "data",
                _ => "estimation",
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": kind, "code": code, "message": e.to_string() })
            );
            ExitCode::from(code)
        }
    }
}
