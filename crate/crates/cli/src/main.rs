//! `bfmix`: fit Bayesian Gaussian mixtures to CSV data, identify the
//! cluster-specific parameters and evaluate partitions.

mod config;
mod error;
mod evaluate;
mod fit;
mod identify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Mode, PartialConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "bfmix", version, about)]
#[command(after_help = "Exit codes: 2 input error, 3 configuration error, \
4 sampler failure, 5 identification failure.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more MCMC chains and write draws, traces and a manifest.
    Fit(FitArgs),
    /// Select K₊, relabel the draws and write summaries and the MAP partition.
    Identify(IdentifyArgs),
    /// Compare a partition with reference classes.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct OutDir {
    /// Output directory, created if missing.
    #[arg(long, env = "BFMIX_OUT_DIR", default_value = "bfmix-out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with one header row.
    data: PathBuf,
    /// TOML or JSON file with configuration keys; a run manifest also works.
    /// Flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Number of components (fixed-k, sfm; default 3 and 10) or initial K (mfm; default 10).
    #[arg(long)]
    k: Option<usize>,
    /// Dirichlet parameter γ (fixed-k default 1, sfm default 0.01).
    #[arg(long)]
    gamma: Option<f64>,
    /// α in γ_K = α/K (mfm, default 0.5).
    #[arg(long)]
    alpha: Option<f64>,
    /// BNB(a_λ, a_π, b_π) prior on K − 1 (mfm, default 1,4,3).
    #[arg(long, value_parser = parse_bnb)]
    bnb: Option<[f64; 3]>,
    /// Upper bound on K (mfm, default 100).
    #[arg(long)]
    k_max: Option<usize>,
    /// c in c0 = c + (r+1)/2 (default 2.5).
    #[arg(long)]
    c: Option<f64>,
    /// Prior share φ of the data variance per component (default 0.75).
    #[arg(long)]
    phi: Option<f64>,
    /// Total sweeps, burn-in included (default 30000).
    #[arg(long)]
    iters: Option<usize>,
    /// Burn-in sweeps (default 5000).
    #[arg(long)]
    burnin: Option<usize>,
    /// Keep every n-th sweep after burn-in (default 1).
    #[arg(long)]
    thin: Option<usize>,
    /// Seed of the first chain; chain i uses seed + i (default 1).
    #[arg(long)]
    seed: Option<u64>,
    /// Independent chains, run concurrently (default 1).
    #[arg(long)]
    chains: Option<usize>,
    /// Also write the sampled assignments of every stored sweep.
    #[arg(long)]
    store_assignments: bool,
    /// Apply a random label permutation after every sweep.
    #[arg(long)]
    permute: bool,
    /// Feature columns by name or 0-based index; default all but the label column.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// Column holding reference classes, excluded from the features.
    #[arg(long)]
    label_col: Option<String>,
    #[command(flatten)]
    out: OutDir,
}

impl FitArgs {
    fn flags(&self) -> PartialConfig {
        PartialConfig {
            mode: self.mode,
            k: self.k,
            gamma: self.gamma,
            alpha: self.alpha,
            bnb: self.bnb,
            k_max: self.k_max,
            c: self.c,
            phi: self.phi,
            iters: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            seed: self.seed,
            chains: self.chains,
            store_assignments: self.store_assignments.then_some(true),
            permute: self.permute.then_some(true),
            columns: self.columns.clone(),
            label_col: self.label_col.clone(),
        }
    }
}

fn parse_bnb(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("'{x}': {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|_| "expected three comma-separated numbers".to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum KPlusChoice {
    Auto,
    Fixed(usize),
}

fn parse_kplus(s: &str) -> Result<KPlusChoice, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(KPlusChoice::Auto);
    }
    match s.parse() {
        Ok(0) | Err(_) => Err("expected 'auto' or a positive integer".into()),
        Ok(k) => Ok(KPlusChoice::Fixed(k)),
    }
}

#[derive(Args)]
struct IdentifyArgs {
    /// Draws file written by `fit`.
    draws: PathBuf,
    /// Assignments file; by default the matching `assignments*.csv` next to
    /// the draws is used when present.
    #[arg(long)]
    assignments: Option<PathBuf>,
    /// Number of clusters to identify, or `auto` for the posterior mode.
    #[arg(long, default_value = "auto", value_parser = parse_kplus)]
    kplus: KPlusChoice,
    /// Seed for the k-means relabeling.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct EvaluateArgs {
    /// CSV with the estimated partition.
    partition: PathBuf,
    /// CSV with the reference classes.
    truth: PathBuf,
    /// Partition column, by name or 0-based index.
    #[arg(long, default_value = "label")]
    partition_col: String,
    /// Reference class column, by name or 0-based index.
    #[arg(long, default_value = "label")]
    truth_col: String,
    #[command(flatten)]
    out: OutDir,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(a) => {
            let flags = a.flags();
            let merged = match &a.config {
                Some(p) => flags.over(config::load(p)?),
                None => flags,
            };
            fit::run(&a.data, merged.resolve()?, &a.out.out_dir)
        }
        Command::Identify(a) => identify::run(
            &a.draws,
            a.assignments.as_deref(),
            a.kplus,
            a.seed,
            &a.out.out_dir,
        ),
        Command::Evaluate(a) => evaluate::run(
            &a.partition,
            &a.truth,
            &a.partition_col,
            &a.truth_col,
            &a.out.out_dir,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

pub(crate) fn ensure_dir(dir: &std::path::Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))
}

pub(crate) fn write_json<T: serde::Serialize>(
    path: &std::path::Path,
    value: &T,
) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text + "\n")
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}
