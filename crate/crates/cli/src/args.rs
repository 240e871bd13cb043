use std::path::PathBuf;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand, ValueEnum};

const VARIANTS: [&str; 7] = [
    "dbn",
    "cnn",
    "cnn-dropout",
    "cnn-gaussian",
    "cnn-gabor",
    "cnn-gaussian-dropout",
    "cnn-gabor-dropout",
];

#[derive(Debug, Parser)]
#[command(
    name = "hbdr",
    version,
    about = "Handwritten digit recognition with convolutional networks and deep belief networks",
    after_help = "Exit status: 0 on success, 2 for invalid input (flags, config, data, model files), 1 for other failures."
)]
pub struct Cli {
    /// Worker threads for minibatch and evaluation parallelism (results do not depend on it)
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a recognizer and write model.hbdr plus CSV reports
    Train(TrainArgs),
    /// Evaluate a trained model on the test split recorded in its config
    Eval(EvalArgs),
    /// Greedily pretrain the DBN's RBM stack and write stack.hbdr
    Pretrain(PretrainArgs),
    /// Export learned filters, DBN weights, or misclassified digits as PGM images
    Export(ExportArgs),
    /// Export a Gabor or Gaussian first-layer filter bank as PGM images
    ExportFilters(FilterArgs),
}

/// Configuration sources. Precedence: flags, then `--set`, then the config
/// file, then built-in defaults.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// `key = value` config file
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override any config key (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_parser = PossibleValuesParser::new(VARIANTS))]
    pub variant: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training images per class; the rest of each class is the test split
    #[arg(long)]
    pub train_per_class: Option<usize>,
    /// Cap on test images per class
    #[arg(long)]
    pub test_per_class: Option<usize>,
    /// Dropout keep probability for dropout variants
    #[arg(long)]
    pub keep_prob: Option<f64>,
    /// Keep the first convolution layer at its initial filter bank
    #[arg(long)]
    pub freeze_c1: bool,
    /// Threshold pixels to {0, 1} at this level before training
    #[arg(long, value_name = "THRESHOLD")]
    pub binarize: Option<f32>,
    #[arg(long, value_parser = PossibleValuesParser::new(["xent", "mse"]))]
    pub loss: Option<String>,
    /// Dataset: a class-directory root, `idx:<images>,<labels>`, or `synthetic:<per-class>` [default: $HBDR_DATA]
    #[arg(long, value_name = "SOURCE")]
    pub data: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Also write best.hbdr, the model after the epoch with the highest test accuracy
    #[arg(long)]
    pub save_best: bool,
    /// DBN only: fine-tune this pretrained stack instead of pretraining
    #[arg(long, value_name = "FILE")]
    pub stack: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file written by `train`
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Dataset override [default: the model's recorded data, then $HBDR_DATA]
    #[arg(long, value_name = "SOURCE")]
    pub data: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportWhat {
    /// First convolution layer kernels of a CNN
    Filters,
    /// Incoming weights of every hidden unit of a DBN or RBM stack
    Weights,
    /// Misclassified test digits
    Misclassified,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub what: ExportWhat,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Dataset override for `misclassified`
    #[arg(long, value_name = "SOURCE")]
    pub data: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BankKind {
    Gabor,
    Gaussian,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long, value_enum)]
    pub kind: BankKind,
    #[arg(long, default_value_t = 32)]
    pub count: usize,
    #[arg(long, default_value_t = 5)]
    pub size: usize,
    /// Standard deviation of the Gaussian bank
    #[arg(long, default_value_t = 1.0)]
    pub std: f64,
    /// Seed of the Gaussian bank (matches the `init` stream of `train`)
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}
