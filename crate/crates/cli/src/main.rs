mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use structboost::Error;

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "STRUCTBOOST_THREADS";

#[derive(Parser)]
#[command(name = "structboost", version, about = "Structured boosting by column generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it as JSON.
    Train(TrainArgs),
    /// Predict labels for a dataset.
    Predict(PredictArgs),
    /// Compute task metrics of a model on labelled data.
    Eval(PredictArgs),
    /// Compare the 1-slack and m-slack masters on a ranking problem.
    BenchAuc(BenchArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TaskKind {
    Binary,
    Multiclass,
    Tree,
    Ranking,
    Crf,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeakArg {
    Stump,
    Perceptron,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    OneSlack,
    MSlack,
}

#[derive(Args)]
struct SolverArgs {
    /// Column-generation tolerance.
    #[arg(long = "eps-cg", default_value_t = 1e-5)]
    eps_cg: f64,
    #[arg(long, default_value = "stump")]
    weak: WeakArg,
    /// Maximum boosting iterations.
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// Keep the cutting-plane tolerance fixed instead of adapting it.
    #[arg(long)]
    fixed_eps: bool,
    /// Largest constraint count the m-slack master may build.
    #[arg(long, default_value_t = 1_000_000)]
    mslack_cap: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    task: TaskKind,
    /// Training data: libsvm text, or a segmentation document for crf.
    #[arg(long)]
    data: PathBuf,
    /// Taxonomy file for the tree task.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Class count for multiclass (default: largest label).
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long, default_value_t = 10.0)]
    c: f64,
    /// Cutting-plane tolerance of the 1-slack master.
    #[arg(long = "eps-cp", default_value_t = 0.01)]
    eps_cp: f64,
    #[arg(long, default_value = "one-slack")]
    solver: SolverArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Train the crf without pairwise potentials.
    #[arg(long)]
    unary_only: bool,
    #[command(flatten)]
    solver_args: SolverArgs,
    /// Model output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Final restricted master LP in plain text.
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Ranking data in libsvm format; the largest label marks positives.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated C values.
    #[arg(long = "c-grid", value_delimiter = ',', default_value = "10")]
    c_grid: Vec<f64>,
    #[arg(long = "eps-cp", default_value_t = 0.001)]
    eps_cp: f64,
    /// Seed of the train/test split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of samples used for training.
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
    /// Run only one of the solvers.
    #[arg(long)]
    solver: Option<SolverArg>,
    #[command(flatten)]
    solver_args: SolverArgs,
    /// Report CSV path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration objective and time CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    task: TaskKind,
    /// Samples, or grid instances for crf.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Feature count for binary and ranking data.
    #[arg(long, default_value_t = 4)]
    dim: usize,
    /// Positive fraction for ranking data.
    #[arg(long, default_value_t = 0.2)]
    positive_fraction: f64,
    /// Grid side for crf instances.
    #[arg(long, default_value_t = 8)]
    grid: usize,
    /// Unary noise level for crf instances.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the taxonomy of tree data.
    #[arg(long)]
    taxonomy_out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Io(_) | Error::Json(_) => 2,
        Error::Solver(_) | Error::Convergence { .. } | Error::Submodularity(_) => 3,
        Error::Capacity { .. } => 4,
    }
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("{THREADS_VAR} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Eval(a) => commands::eval(a),
        Command::BenchAuc(a) => commands::bench(a),
        Command::Synth(a) => commands::synth(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_documented_exit_codes() {
        assert_eq!(exit_code(&Error::InvalidInput("x".into())), 2);
        assert_eq!(
            exit_code(&Error::Parse {
                line: 3,
                msg: "x".into()
            }),
            2
        );
        assert_eq!(
            exit_code(&Error::Convergence {
                iterations: 5,
                gap: 0.1
            }),
            3
        );
        assert_eq!(exit_code(&Error::Capacity { needed: 10, cap: 5 }), 4);
    }

    #[test]
    fn bench_defaults_use_the_tighter_tolerance() {
        let cli = Cli::try_parse_from(["structboost", "bench-auc", "--data", "d.txt", "--c-grid", "1,10,100"]).unwrap();
        let Command::BenchAuc(a) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(a.eps_cp, 0.001);
        assert_eq!(a.c_grid, vec![1.0, 10.0, 100.0]);
        let cli = Cli::try_parse_from(["structboost", "train", "--task", "binary", "--data", "d.txt"]).unwrap();
        let Command::Train(t) = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!((t.eps_cp, t.solver_args.iters), (0.01, 200));
    }
}
