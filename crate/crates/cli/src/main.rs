//! `fisc`: feature interaction scores across a mask-based Rashomon set.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fisc_core::synthetic::SyntheticFn;
use fisc_core::LossKind;

use config::{absolute, BenchConfig, GenerateConfig, Manifest, RunConfig};
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "fisc", version, about = "Feature interaction scores across a mask-based Rashomon set")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pairwise interaction detection AUC on the synthetic functions F1-F4
    Bench(BenchArgs),
    /// Write a seeded N(0,1) dataset labelled by a builtin model
    Generate(GenerateArgs),
    /// Greedy mask search: model class, MCR ranges, and FISC ranges for --features
    Search(RunArgs),
    /// Interaction scores of the reference (or a model-class member)
    Fis(RunArgs),
    /// Halo curve (pair) or surface (triple) data
    Halo(RunArgs),
    /// Swarm-plot data from the sampled model class
    Swarm(RunArgs),
    /// Closed-form mask bounds and score range for a sigmoid MLP
    MlpAnalytic(RunArgs),
    /// Rerun a command from its run.json
    Replay(ReplayArgs),
}

#[derive(Args)]
struct Common {
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Restrict to one function (F1..F4)
    #[arg(long)]
    function: Option<SyntheticFn>,
    /// Shuffle ground-truth labels (negative control)
    #[arg(long)]
    shuffle_labels: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct GenerateArgs {
    /// Builtin model labelling the data, e.g. `sum-product(2)`
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Feature count, for models whose arity is not fixed
    #[arg(long)]
    p: Option<usize>,
    /// Standard deviation of additive Gaussian label noise
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RunArgs {
    /// Headered CSV; every column except the target is a feature
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column (default: last)
    #[arg(long)]
    target: Option<String>,
    /// Reference model: linear(w..), logistic(w..,b), sigmoid-mlp(alpha=..;beta=../..;b=..),
    /// synthetic(F1..F4), sum-product(k), fit-logistic(iters=..,lr=..), fit-mlp(hidden=..,iters=..,lr=..)
    #[arg(long)]
    model: String,
    /// Model-class file to take a member mask from
    #[arg(long)]
    mask_file: Option<PathBuf>,
    /// Entry of --mask-file (0 is the reference)
    #[arg(long)]
    mask_index: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Initial learning rate of the mask search
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// rmse, mse, signed or zero-one
    #[arg(long, default_value = "mse")]
    loss: LossKind,
    /// permutation:R, baseline:zeros or baseline:FILE
    #[arg(long, default_value = "permutation:30")]
    strategy: String,
    /// Shuffle each column of a joint replacement independently
    #[arg(long)]
    independent_permutations: bool,
    /// Feature set such as `0,1`; repeat the flag or separate sets with `;`
    #[arg(long)]
    features: Vec<String>,
    /// Halo radii, comma-separated (default: epsilon)
    #[arg(long, value_delimiter = ',')]
    radii: Vec<f64>,
    /// Follow the search pseudocode verbatim (2ε threshold, upward lower search)
    #[arg(long)]
    paper_literal: bool,
    /// Halo allocation grid: shares are multiples of 1/N
    #[arg(long, default_value_t = 10)]
    grid_resolution: usize,
    /// Loss evaluations allowed per search direction
    #[arg(long, default_value_t = 10_000)]
    max_steps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    common: Common,
}

impl RunArgs {
    fn resolve(self) -> CliResult<(RunConfig, Common)> {
        let cfg = RunConfig {
            data: self.data.as_deref().map(absolute).transpose()?,
            target: self.target,
            model: self.model,
            mask_file: self.mask_file.as_deref().map(absolute).transpose()?,
            mask_index: self.mask_index,
            epsilon: self.epsilon,
            lr: self.lr,
            seed: self.seed,
            loss: self.loss,
            strategy: resolve_strategy(&self.strategy)?,
            independent_permutations: self.independent_permutations,
            features: self.features,
            radii: self.radii,
            paper_literal: self.paper_literal,
            grid_resolution: self.grid_resolution,
            max_steps: self.max_steps,
        };
        cfg.validate()?;
        Ok((cfg, self.common))
    }
}

/// Baseline files are recorded by absolute path so manifests replay from anywhere.
fn resolve_strategy(s: &str) -> CliResult<String> {
    match s.split_once(':') {
        Some(("baseline", file)) if file.trim() != "zeros" => {
            Ok(format!("baseline:{}", absolute(file.trim().as_ref())?.display()))
        }
        _ => Ok(s.to_string()),
    }
}

fn resolve(command: Command) -> CliResult<(Manifest, Common)> {
    Ok(match command {
        Command::Bench(a) => (
            Manifest::Bench(BenchConfig {
                functions: a.function.map_or(SyntheticFn::ALL.to_vec(), |f| vec![f]),
                shuffle_labels: a.shuffle_labels,
                seed: a.seed,
            }),
            a.common,
        ),
        Command::Generate(a) => (
            Manifest::Generate(GenerateConfig {
                model: a.model,
                n: a.n,
                p: a.p,
                noise: a.noise,
                seed: a.seed,
            }),
            a.common,
        ),
        Command::Search(a) => a.resolve().map(|(c, o)| (Manifest::Search(c), o))?,
        Command::Fis(a) => a.resolve().map(|(c, o)| (Manifest::Fis(c), o))?,
        Command::Halo(a) => a.resolve().map(|(c, o)| (Manifest::Halo(c), o))?,
        Command::Swarm(a) => a.resolve().map(|(c, o)| (Manifest::Swarm(c), o))?,
        Command::MlpAnalytic(a) => a.resolve().map(|(c, o)| (Manifest::MlpAnalytic(c), o))?,
        Command::Replay(a) => (Manifest::read(&a.manifest)?, a.common),
    })
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    match threads {
        Some(0) => Err(CliError::config("--threads must be >= 1")),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("--threads: {e}"))),
        #[cfg(not(feature = "parallel"))]
        Some(_) => {
            log::warn!("built without the parallel feature; --threads ignored");
            Ok(())
        }
        None => Ok(()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (manifest, common) = resolve(cli.command)?;
    configure_threads(common.threads)?;
    commands::execute(&manifest, &common.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FISC_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
