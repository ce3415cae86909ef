//! `vadkit` command-line interface.

mod commands;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vadkit::VadError;

#[derive(Parser, Debug)]
#[command(
    name = "vadkit",
    version,
    about = "CNN-BiLSTM voice activity detection toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract log-mel spectrogram images from a WAV file.
    Features(FeaturesArgs),
    /// Train a model on a directory of paired feature and label files.
    Train(TrainArgs),
    /// Write 10 ms speech scores for a WAV file.
    Predict(PredictArgs),
    /// Score frame predictions against labels at a fixed false positive rate.
    Eval(EvalArgs),
    /// Run nested cross-validation with a hyperparameter sweep.
    Cv(CvArgs),
    /// Print the parameter count of a model configuration.
    Params(ParamsArgs),
    /// Write ROC plot data for a scores / labels pair.
    RocExport(RocExportArgs),
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Working sample rate the audio is resampled to.
    #[arg(long, default_value_t = vadkit::WORKING_RATE_HZ)]
    pub rate: u32,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Directory of `<name>.vfea` feature files with `<name>.csv` labels.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model_config: PathBuf,
    #[arg(long)]
    pub train_config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional validation directory; enables best-epoch snapshots.
    #[arg(long)]
    pub val_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Scores CSV; repeat together with --labels to pool recordings.
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    #[arg(long, required = true)]
    pub labels: Vec<PathBuf>,
    #[arg(long, default_value_t = vadkit::evaluation::PAPER_OPERATING_FPR)]
    pub fpr: f64,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub roc: Option<PathBuf>,
    /// Also print the published reference rows.
    #[arg(long)]
    pub with_baselines: bool,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// JSON object mapping axis names to candidate lists.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub outer: usize,
    #[arg(long, default_value_t = 9)]
    pub inner: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Base model configuration the sweep varies (default: the small model).
    #[arg(long)]
    pub base_model: Option<PathBuf>,
    /// Base training configuration.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    /// Median accuracy gap below which size axes are shrunk.
    #[arg(long, default_value_t = 0.01)]
    pub threshold: f64,
    /// Corrupts the fold plan to exercise the leakage check.
    #[arg(long, hide = true)]
    pub debug_inject_leak: bool,
}

#[derive(Args, Debug)]
pub struct ParamsArgs {
    #[arg(long)]
    pub model_config: PathBuf,
}

#[derive(Args, Debug)]
pub struct RocExportArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn exit_code(e: &VadError) -> u8 {
    match e.root() {
        VadError::Metric(_) => 3,
        VadError::Leakage(_) | VadError::Training(_) => 4,
        _ => 2,
    }
}

fn init_threads() {
    let Ok(v) = std::env::var("VADKIT_THREADS") else {
        return;
    };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::warn!("could not size thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring VADKIT_THREADS={v}: not a positive integer"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    init_threads();
    let result = match cli.command {
        Command::Features(a) => commands::features(&a),
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Cv(a) => commands::cv(&a),
        Command::Params(a) => commands::params(&a),
        Command::RocExport(a) => commands::roc_export(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
