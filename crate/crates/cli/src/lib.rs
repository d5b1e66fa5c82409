//! The `tslt` command surface: train, evaluate, predict, synth, inspect.
//!
//! [`run`] parses arguments and returns the process exit code, so the whole
//! CLI can be driven in-process.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tslt_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "tslt",
    version,
    about = "Lightweight transformer for flow-based intrusion detection"
)]
pub struct Cli {
    /// Suppress per-epoch progress on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit preprocessing, train a model and write bundle, history and test report.
    Train(TrainArgs),
    /// Score a labelled CSV with a saved bundle.
    Evaluate(EvaluateArgs),
    /// Write per-row class probabilities for a CSV.
    Predict(PredictArgs),
    /// Generate a synthetic labelled flow table.
    Synth(SynthArgs),
    /// Print a bundle's layer table and metadata.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Tslt,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Multiclass,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Uniform,
    Skewed,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label_column: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model bundle path.
    #[arg(long, default_value = "model.tslt")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Tslt)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = TaskArg::Multiclass)]
    pub task: TaskArg,
    /// Label of the benign class (binary task only) [default: Benign].
    #[arg(long)]
    pub benign_label: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 5)]
    pub patience: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    /// Per-epoch history JSON [default: <out>.history.json].
    #[arg(long)]
    pub history_out: Option<PathBuf>,
    /// Test-set report JSON [default: <out>.report.json].
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Also write the held-out test rows as CSV.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Label column [default: the one the bundle was trained with].
    #[arg(long)]
    pub label_column: Option<String>,
    /// Report JSON path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV path; `-` writes to stdout.
    #[arg(long, default_value = "-")]
    pub out: PathBuf,
    /// Rows encoded and scored per block.
    #[arg(long, default_value_t = 4096)]
    pub block_rows: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub features: usize,
    #[arg(long, default_value_t = 8.0)]
    pub separation: f64,
    #[arg(long, value_enum, default_value_t = ProfileArg::Uniform)]
    pub profile: ProfileArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub bundle: PathBuf,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) => EXIT_USAGE,
            Error::Data(_) | Error::Csv(_) | Error::Io { .. } | Error::Format(_) | Error::EmptyInput(_) => EXIT_DATA,
            Error::Divergence { .. } | Error::NonFinite(_) => EXIT_NUMERIC,
            Error::Shape { .. } | Error::StaleCache(_) => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Train(a) => commands::train::run(a, cli.quiet),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Predict(a) => commands::predict::run(a, cli.quiet),
        Command::Synth(a) => commands::synth::run(a),
        Command::Inspect(a) => commands::inspect::run(a),
    }
}
