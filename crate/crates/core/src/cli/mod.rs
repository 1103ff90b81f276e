//! The `pssl` command: one subcommand per pipeline stage.
//!
//! Stages communicate through directories. Every command that writes output
//! also writes `runspec.json` there, holding the tool version and the fully
//! resolved flags. Exit codes: 0 success, 2 usage or configuration error,
//! 3 quality floor not met, 4 I/O failure.

pub mod commands;
mod dataset;
pub mod visual;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::toynets::TrunkArch;
use crate::trainkit::{AugmentConfig, Schedule, TrainConfig, DEFAULT_BACKGROUND_WEIGHT, MOMENTUM};
use crate::{Error, Result};

pub use dataset::{load_labeled_dir, mask_name_for, write_labeled_dir, LabeledItem, DATASET_FILE};

pub const RUNSPEC_FILE: &str = "runspec.json";
pub const TOOL_VERSION: &str = concat!("pssl-forge ", env!("CARGO_PKG_VERSION"));

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_QUALITY: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "pssl",
    version,
    about = "Pseudo segmentation labels from classifier explanations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic blob dataset with masks.
    Synth(SynthArgs),
    /// Train M image classifiers with distinct seeds.
    TrainClassifiers(TrainClassifiersArgs),
    /// Build a PSSL dataset from images and classifier checkpoints.
    Build(BuildArgs),
    /// Pre-train a segmenter on a PSSL dataset.
    Pretrain(PretrainArgs),
    /// Fine-tune a segmenter on labeled masks, optionally over an lr grid.
    Finetune(FinetuneArgs),
    /// Pre-train and fine-tune once per background weight and seed.
    SweepBgweight(SweepArgs),
    /// Score a segmenter on a labeled dataset.
    Eval(EvalArgs),
    /// Render records, predictions and metrics as pictures.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Trunk shape shared by every network a command creates.
#[derive(Debug, Clone, Args, Serialize)]
pub struct NetArgs {
    /// Conv widths of the trunk, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "8,16")]
    pub widths: Vec<usize>,
}

impl NetArgs {
    pub fn trunk(&self, in_channels: usize) -> TrunkArch {
        TrunkArch::new(in_channels, self.widths.clone())
    }
}

/// Every [`TrainConfig`] field except the seed and learning rate, which
/// commands expose on their own.
#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = MOMENTUM)]
    pub momentum: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    /// Epoch at which step decay divides the rate by 10.
    #[arg(long)]
    pub step_epoch: Option<usize>,
    /// Disable random horizontal flips.
    #[arg(long)]
    pub no_flip: bool,
    #[arg(long)]
    pub crop: Option<usize>,
    #[arg(long, requires = "scale_max")]
    pub scale_min: Option<f64>,
    #[arg(long, requires = "scale_min")]
    pub scale_max: Option<f64>,
}

impl TrainArgs {
    /// Resolved config; `epochs` and `step_epoch` fall back to the given defaults.
    pub fn config(&self, epochs: usize, step_epoch: usize, lr: f64, seed: u64, schedule: Schedule) -> TrainConfig {
        let epochs = self.epochs.unwrap_or(epochs);
        TrainConfig {
            epochs,
            batch_size: self.batch_size,
            base_lr: lr,
            schedule,
            step_decay_epoch: self.step_epoch.unwrap_or(step_epoch.min(epochs)),
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            seed,
            augment: AugmentConfig {
                hflip: !self.no_flip,
                crop: self.crop,
                scale: self.scale_min.zip(self.scale_max),
            },
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainClassifiersArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub models: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Minimum training accuracy every model must reach.
    #[arg(long, default_value_t = 0.9)]
    pub accuracy_floor: f64,
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BuildArgs {
    /// Image dataset directory with a manifest.
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of classifier `.tnet` checkpoints.
    #[arg(long)]
    pub models_dir: PathBuf,
    #[arg(long, default_value_t = 25)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.15)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; output does not depend on this.
    #[arg(long, env = "PSSL_FORGE_WORKERS", default_value_t = 1)]
    #[serde(skip)]
    pub workers: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Where a segmenter's starting weights come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitSpec {
    Random,
    /// Trunk copied from a checkpoint, head freshly seeded.
    Backbone(PathBuf),
    /// Every weight copied from a segmenter checkpoint.
    Full(PathBuf),
}

impl std::str::FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            None if s == "random" => Ok(InitSpec::Random),
            Some(("backbone", p)) if !p.is_empty() => Ok(InitSpec::Backbone(p.into())),
            Some(("full", p)) if !p.is_empty() => Ok(InitSpec::Full(p.into())),
            _ => Err(format!("expected random, backbone:PATH or full:PATH, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PretrainArgs {
    /// Image dataset the PSSL records were built from.
    #[arg(long)]
    pub data: PathBuf,
    /// Built PSSL dataset directory.
    #[arg(long)]
    pub pssl: PathBuf,
    #[arg(long, default_value = "random")]
    pub init: InitSpec,
    #[arg(long, default_value_t = DEFAULT_BACKGROUND_WEIGHT)]
    pub bg_weight: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FinetuneArgs {
    /// Labeled dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Validation set; required when more than one `--lr` is given.
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long, default_value = "random")]
    pub init: InitSpec,
    /// One rate, or a comma separated grid searched for peak validation mIoU.
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    pub lr: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub pssl: PathBuf,
    /// Labeled set for fine-tuning.
    #[arg(long)]
    pub train: PathBuf,
    /// Labeled set for scoring.
    #[arg(long)]
    pub val: PathBuf,
    /// Starting weights for pre-training.
    #[arg(long, default_value = "random")]
    pub init: InitSpec,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,1.0")]
    pub bg_weights: Vec<f64>,
    #[arg(long, default_value_t = 6)]
    pub pretrain_epochs: usize,
    #[arg(long, default_value_t = 6)]
    pub finetune_epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.05)]
    pub finetune_lr: f64,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[command(flatten)]
    pub net: NetArgs,
    /// Cells trained concurrently; results do not depend on this.
    #[arg(long, env = "PSSL_FORGE_WORKERS", default_value_t = 1)]
    #[serde(skip)]
    pub workers: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Truth label excluded from scoring.
    #[arg(long)]
    pub ignore_index: Option<u8>,
    /// Report image-level top-1 accuracy from averaged pixel probabilities.
    #[arg(long)]
    pub classify: bool,
    /// Let background compete in the image-level argmax.
    #[arg(long, requires = "classify")]
    pub include_background: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InspectArgs {
    /// A `.pssl` record to render as a decile heatmap.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Source image for the top-decile overlay or for mask prediction.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Segmenter checkpoint whose prediction on `--image` is colorized.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// A metrics file written by `eval`, drawn as an SVG bar chart.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

/// Reproducibility record written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunSpec<'a, T: Serialize> {
    pub tool: &'static str,
    pub command: &'a str,
    /// Outputs live next to this file.
    pub output: &'static str,
    pub config: &'a T,
}

pub(crate) fn write_runspec<T: Serialize>(dir: &Path, command: &str, config: &T) -> Result<()> {
    let spec = RunSpec {
        tool: TOOL_VERSION,
        command,
        output: ".",
        config,
    };
    let path = dir.join(RUNSPEC_FILE);
    let json = serde_json::to_string_pretty(&spec).expect("runspec serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

/// Outcome of a command that ran to completion but may still have failed a floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    QualityFloorUnmet,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::NonFiniteLoss { .. } => EXIT_QUALITY,
        _ => EXIT_CONFIG,
    }
}

pub fn execute(command: Command) -> Result<Status> {
    match command {
        Command::Synth(a) => commands::synth(&a),
        Command::TrainClassifiers(a) => commands::train_classifiers(&a),
        Command::Build(a) => commands::build(&a),
        Command::Pretrain(a) => commands::pretrain(&a),
        Command::Finetune(a) => commands::finetune(&a),
        Command::SweepBgweight(a) => commands::sweep_bgweight(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Inspect(a) => commands::inspect(&a),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(Status::Ok) => EXIT_OK,
        Ok(Status::QualityFloorUnmet) => EXIT_QUALITY,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
