use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grasp_core::augment::Families;
use grasp_core::regressor::OutputActivation;

#[derive(Debug, Parser)]
#[command(name = "grasp", version, about = "Train and evaluate grasp-rectangle regressors on frozen image features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a regression head and write checkpoint.bin, report.json, loss.csv and split.txt
    Train(TrainCmd),
    /// Score a checkpoint with the rectangle metric, or train several seeds and report min/mean/max
    Eval(EvalCmd),
    /// List (and with --preview, draw) the augmented variants of one sample
    Augment(AugmentCmd),
    /// Feature-file utilities
    Features {
        #[command(subcommand)]
        command: FeaturesCmd,
    },
    /// Draw ground truths and an optional prediction over a sample's RGB image
    Render(RenderCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExtractorKind {
    Toy,
    FeaturesFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    Train,
    Val,
    All,
}

/// Comma-separated numbers, e.g. `0,45,90`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumList(pub Vec<f64>);

impl FromStr for NumList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
            .collect::<Result<Vec<_>, _>>()
            .map(NumList)
    }
}

/// Comma-separated seeds, e.g. `0,1,2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<u64>().map_err(|_| format!("`{t}` is not a seed")))
            .collect::<Result<Vec<_>, _>>()
            .map(SeedList)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Cornell-layout dataset directory
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Use N generated samples with linearly derived targets instead of a dataset
    #[arg(long, value_name = "N")]
    pub synthetic: Option<usize>,
    /// Flat `key = value` file; command-line flags take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractorArgs {
    /// Feature source [default: toy]
    #[arg(long, value_enum)]
    pub extractor: Option<ExtractorKind>,
    /// Exported feature file, required with `--extractor features-file`
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// Width of toy features [default: 1024]
    #[arg(long, value_name = "N")]
    pub toy_dim: Option<usize>,
    /// Seed of the toy projection [default: 0]
    #[arg(long, value_name = "N")]
    pub toy_seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct AugmentArgs {
    /// Rotation angles in degrees [default: 0,45,...,315]
    #[arg(long, value_name = "DEG,...")]
    pub rotations: Option<NumList>,
    /// Centre-crop zoom ratios in (0, 1] [default: 0.5,0.6,0.7,0.8,0.9,1]
    #[arg(long, value_name = "R,...")]
    pub zooms: Option<NumList>,
    /// `product` (every pair) or `separate` (rotations, then zooms) [default: product]
    #[arg(long, value_name = "MODE")]
    pub families: Option<Families>,
    /// Train on unaugmented samples only
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Run seed for splitting, initialization, batching and dropout [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// [default: 25]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 100]
    #[arg(long)]
    pub batches_per_epoch: Option<usize>,
    /// [default: 128]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Validation batches per epoch [default: 100]
    #[arg(long)]
    pub val_batches: Option<usize>,
    /// [default: 10]
    #[arg(long)]
    pub val_batch_size: Option<usize>,
    /// Training fraction of the samples [default: 0.9]
    #[arg(long)]
    pub split_ratio: Option<f64>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Dropout probability after each hidden layer [default: 0.5]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Width of both hidden layers [default: 512]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// `linear` or `tanh` [default: linear]
    #[arg(long, value_name = "ACT")]
    pub output_activation: Option<OutputActivation>,
    #[command(flatten)]
    pub augment: AugmentArgs,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub extractor: ExtractorArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub extractor: ExtractorArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Checkpoint to score
    #[arg(long, value_name = "FILE", conflicts_with = "runs")]
    pub checkpoint: Option<PathBuf>,
    /// Split manifest written by `train`; selects samples with --subset
    #[arg(long, value_name = "FILE")]
    pub split: Option<PathBuf>,
    /// Which part of the split to score [default: val]
    #[arg(long, value_enum)]
    pub subset: Option<Subset>,
    /// Train this many runs and report min/mean/max accuracy
    #[arg(long, value_name = "N")]
    pub runs: Option<usize>,
    /// Seeds of the runs [default: 0,1,...]
    #[arg(long, value_name = "S,...", requires = "runs")]
    pub seeds: Option<SeedList>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AugmentCmd {
    /// Cornell-layout dataset directory
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Sample id, e.g. pcd0100
    #[arg(long)]
    pub id: Option<String>,
    /// Write one annotated PNG per surviving variant
    #[arg(long)]
    pub preview: bool,
    #[command(flatten)]
    pub augment: AugmentArgs,
    /// Flat `key = value` file; command-line flags take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory for previews
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum FeaturesCmd {
    /// Check a feature file and print its header and SHA-256
    Validate {
        /// Feature file to check
        file: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RenderCmd {
    /// Cornell-layout dataset directory
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Sample id, e.g. pcd0100
    #[arg(long)]
    pub id: Option<String>,
    /// Checkpoint whose prediction is drawn and judged
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub extractor: ExtractorArgs,
    /// Flat `key = value` file; command-line flags take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}
