//! Command-line surface: train, predict, eval, boundcheck, synth. The
//! command implementations live in [`commands`] so integration suites can
//! drive them in-process.

pub mod commands;
pub mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Exit codes: 0 success, 1 data/config error, 2 numerical abort.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Numeric(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Parser, Debug)]
#[command(
    name = "piecewise",
    version,
    about = "Local and exact training for undirected sequence models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a conditional model and write it to a model file
    Train(TrainArgs),
    /// Decode a corpus with a trained model (max-product)
    Predict(PredictArgs),
    /// Score predictions against gold labels (chunk or token F1)
    Eval(EvalArgs),
    /// Randomized verification of the piecewise and reweighted bounds
    Boundcheck(BoundcheckArgs),
    /// Generate a synthetic corpus from a known model
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct TrainArgs {
    /// Flat `key = value` config file; command-line flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training corpus (column format)
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Output model path
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// exact | piecewise | pw-reweighted | pl-node | pl-edge
    #[arg(long)]
    pub objective: Option<String>,
    /// chain | factorial | skipchain
    #[arg(long)]
    pub structure: Option<String>,
    /// brute | tree | loopy (normalizer engine for the exact objective)
    #[arg(long)]
    pub inference: Option<String>,
    /// Gaussian prior variance; omit (and omit the config key) to disable
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Column roles, e.g. `word,attr:pos,label`
    #[arg(long)]
    pub schema: Option<String>,
    /// Initialize weights from a previously saved model
    #[arg(long = "warm-start")]
    pub warm_start: Option<PathBuf>,
    /// Lexicon as `name=path` (one word per line); repeatable
    #[arg(long)]
    pub lexicon: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// L-BFGS iteration budget
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// L-BFGS history size
    #[arg(long)]
    pub memory: Option<usize>,
    /// Gradient max-norm stopping tolerance
    #[arg(long)]
    pub gtol: Option<f64>,
    #[arg(long = "bp-max-iters")]
    pub bp_max_iters: Option<usize>,
    #[arg(long = "bp-tolerance")]
    pub bp_tolerance: Option<f64>,
    #[arg(long = "bp-damping")]
    pub bp_damping: Option<f64>,
    /// sequential | synchronous
    #[arg(long = "bp-schedule")]
    pub bp_schedule: Option<String>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct PredictArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Input corpus to decode
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output path: input columns plus appended predicted label column(s)
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<String>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long = "bp-max-iters")]
    pub bp_max_iters: Option<usize>,
    #[arg(long = "bp-tolerance")]
    pub bp_tolerance: Option<f64>,
    #[arg(long = "bp-damping")]
    pub bp_damping: Option<f64>,
    #[arg(long = "bp-schedule")]
    pub bp_schedule: Option<String>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Gold corpus
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Predictions file (gold columns plus appended predicted labels)
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<String>,
    /// chunk | token
    #[arg(long)]
    pub metric: Option<String>,
    /// Target label for the token metric
    #[arg(long = "target-label")]
    pub target_label: Option<String>,
    /// Label level to score (factorial models have two)
    #[arg(long)]
    pub level: Option<usize>,
    /// Also write the metric lines to this file
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct BoundcheckArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Largest variable count per random instance
    #[arg(long = "max-vars")]
    pub max_vars: Option<usize>,
    /// Largest variable cardinality
    #[arg(long = "max-card")]
    pub max_card: Option<usize>,
    /// θ entries drawn from [-range, range]
    #[arg(long = "theta-range")]
    pub theta_range: Option<f64>,
    /// Force θ = 0 (closed-form slack diagnostics)
    #[arg(long = "zero-theta")]
    pub zero_theta: bool,
    /// random | per-factor | single
    #[arg(long)]
    pub partition: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generator spec file (structure, tables, emissions)
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of sequences
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses arguments and dispatches; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version print to stdout and succeed; real parse
            // errors are config errors (exit 1)
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result: Result<(), CliError> = match cli.command {
        Command::Train(args) => commands::train(&args).map(|_| ()),
        Command::Predict(args) => commands::predict(&args),
        Command::Eval(args) => commands::eval(&args).map(|_| ()),
        Command::Boundcheck(args) => commands::boundcheck(&args).map(|_| ()),
        Command::Synth(args) => commands::synth(&args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
