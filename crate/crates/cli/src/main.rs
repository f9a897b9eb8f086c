//! `fsll`: generate synthetic discrete datasets, fit full-span log-linear or
//! Boltzmann models, re-score stored models, and run comparison sweeps.
//!
//! Exit codes: 0 success, 2 usage, 3 numeric/domain failure, 4 file failure.

mod bench;
mod commands;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fsll_core::{Error, ParentSchedule};

use bench::{cmd_bench, BenchOptions, Preset};
use commands::{cmd_eval, cmd_fit, cmd_gen, ModelKind, ShapeSpec, TrainFlags};

#[derive(Parser)]
#[command(
    name = "fsll",
    version,
    about = "Full-span log-linear fitting and Boltzmann baselines over discrete data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset plus its exact-truth file.
    Gen {
        #[command(subcommand)]
        family: GenFamily,
    },
    /// Fit a model to a dataset; writes model, trace, and report files.
    Fit(FitArgs),
    /// Re-score a stored model against dataset and truth files alone.
    Eval(EvalArgs),
    /// Run the datasets x models x seeds sweep with aggregated outputs.
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum GenFamily {
    /// Rectangular Ising grid (binary spins, uniform coupling).
    Ising {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0.5)]
        coupling: f64,
        /// Number of rows to sample.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Random Bayesian network, up to two parents per node.
    Bn2 {
        #[arg(long)]
        nodes: usize,
        /// Number of rows to sample.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Random Bayesian network, up to three parents per node.
    Bn3 {
        #[arg(long)]
        nodes: usize,
        /// Number of rows to sample.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct FitArgs {
    /// Trainer to run.
    #[arg(long, value_enum)]
    model: ModelKind,
    #[arg(long)]
    data: PathBuf,
    /// Truth file; enables the kl_pstar report column.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory (default: alongside the dataset).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// fsll: halt when no single move improves cost by this much.
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// fsll / bm-di: iteration cap (defaults: 10000 / 500).
    #[arg(long)]
    max_iters: Option<usize>,
    /// fsll: evaluate every append candidate instead of skipping by bound.
    #[arg(long)]
    no_prune: bool,
    /// fsll: recompute the density from scratch every this many moves
    /// (0 disables the refresh).
    #[arg(long, default_value_t = 512)]
    refresh_every: usize,
    /// bm-di: gradient max-norm stopping tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// bm-pcd: learning rate.
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    /// bm-pcd: number of persistent chains.
    #[arg(long, default_value_t = 100)]
    chains: usize,
    /// bm-pcd: parameter update steps.
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// Run seed (drives bm-pcd chains; recorded in the report).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Also write the report row to this file.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    preset: Preset,
    /// Comma-separated seeds, one sweep per seed.
    #[arg(long, default_value = "1,2,3")]
    seeds: String,
    #[arg(long, default_value = "bench")]
    out_dir: PathBuf,
    /// Run cells on worker threads (count from FSLL_THREADS, default all
    /// cores). Fits themselves stay single-threaded either way.
    #[arg(long)]
    parallel: bool,
    /// full preset: also run the exact-gradient Boltzmann trainer.
    #[arg(long)]
    include_bm_di: bool,
    /// Timed fits per cell; the report carries their median wall time.
    #[arg(long, default_value_t = 3)]
    reps: usize,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Numeric(_) | Error::Capacity(_) | Error::Index(_) => 3,
        Error::Io(_) | Error::Parse { .. } => 4,
    }
}

fn parse_seeds(text: &str) -> fsll_core::Result<Vec<u64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::Domain(format!("bad seed '{s}' in --seeds")))
        })
        .collect()
}

fn run(cli: Cli) -> fsll_core::Result<()> {
    match cli.command {
        Command::Gen { family } => {
            let (shape, n, seed, out_dir) = match family {
                GenFamily::Ising { rows, cols, coupling, n, seed, out_dir } => {
                    (ShapeSpec::Ising { rows, cols, coupling }, n, seed, out_dir)
                }
                GenFamily::Bn2 { nodes, n, seed, out_dir } => (
                    ShapeSpec::Bn { nodes, schedule: ParentSchedule::TwoParent },
                    n,
                    seed,
                    out_dir,
                ),
                GenFamily::Bn3 { nodes, n, seed, out_dir } => (
                    ShapeSpec::Bn { nodes, schedule: ParentSchedule::ThreeParent },
                    n,
                    seed,
                    out_dir,
                ),
            };
            cmd_gen(&shape, n, seed, &out_dir)
        }
        Command::Fit(a) => {
            let flags = TrainFlags {
                epsilon: a.epsilon,
                max_iters: a.max_iters,
                prune: !a.no_prune,
                refresh_every: a.refresh_every,
                tolerance: a.tolerance,
                learning_rate: a.learning_rate,
                chains: a.chains,
                steps: a.steps,
                seed: a.seed,
            };
            cmd_fit(a.model, &a.data, a.truth.as_deref(), &flags, a.out_dir.as_deref())
        }
        Command::Eval(a) => cmd_eval(&a.model, &a.truth, &a.data, a.report_out.as_deref()),
        Command::Bench(a) => cmd_bench(&BenchOptions {
            preset: a.preset,
            seeds: parse_seeds(&a.seeds)?,
            out_dir: a.out_dir,
            parallel: a.parallel,
            include_bm_di: a.include_bm_di,
            reps: a.reps,
        }),
    }
}
