//! Command-line surface. The parsed subcommand doubles as the replayable
//! record stored in every run manifest.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use swbce::loss::{GradMode, LossKind, Normalization};
use swbce::metrics::Matching;
use swbce::synth::Texture;

pub const DEFAULT_B_VALUES: &str = "0.25,0.5,0.75,0.9,1,1.1,1.25,1.5,2";

/// Environment variable naming the default output root.
pub const OUT_ROOT_ENV: &str = "SWBCE_OUT_ROOT";

#[derive(Debug, Parser)]
#[command(name = "swbce", version, about = "SWBCE loss lab and edge-map evaluation")]
pub struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Evaluate one loss on a prediction / ground-truth pair.
    Loss(LossArgs),
    /// Finite-difference check of every loss gradient.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic train/test split.
    GenData(GenDataArgs),
    /// Train the toy network on a generated split.
    Train(TrainArgs),
    /// Run a checkpoint over a directory of images.
    Predict(PredictArgs),
    /// ODS / OIS / AP of a prediction directory against ground truth.
    Eval(EvalArgs),
    /// Train and evaluate one model per balance value.
    Sweep(SweepArgs),
    /// Re-run the command recorded in a run manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Loss(_) => "loss",
            Command::Gradcheck(_) => "gradcheck",
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Predict(_) => "predict",
            Command::Eval(_) => "eval",
            Command::Sweep(_) => "sweep",
            Command::Replay(_) => "replay",
        }
    }

    pub fn out_mut(&mut self) -> Option<&mut Option<PathBuf>> {
        match self {
            Command::Loss(a) => Some(&mut a.out),
            Command::Gradcheck(a) => Some(&mut a.out),
            Command::GenData(a) => Some(&mut a.out),
            Command::Train(a) => Some(&mut a.out),
            Command::Predict(a) => Some(&mut a.out),
            Command::Eval(a) => Some(&mut a.out),
            Command::Sweep(a) => Some(&mut a.out),
            Command::Replay(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LossArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// wbce, pred or swbce.
    #[arg(long, default_value = "swbce")]
    pub loss: LossKind,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.1)]
    pub lambda_pred: f64,
    /// detached or full.
    #[arg(long, default_value = "detached")]
    pub grad_mode: GradMode,
    /// sum or mean.
    #[arg(long, default_value = "sum")]
    pub norm: Normalization,
    /// Also write the gradient as a rescaled 16-bit PGM.
    #[arg(long)]
    pub grad_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub n_train: usize,
    #[arg(long, default_value_t = 7)]
    pub n_test: usize,
    /// Side length of the square images.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// none, stripes or checker.
    #[arg(long, default_value = "stripes")]
    pub texture: Texture,
    #[arg(long, default_value_t = 0.2)]
    pub texture_contrast: f64,
    #[arg(long, default_value_t = 4)]
    pub shapes: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Dataset root written by gen-data.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "swbce")]
    pub loss: LossKind,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub wd: f64,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value = "detached")]
    pub grad_mode: GradMode,
    /// Random crop as HxW.
    #[arg(long, value_parser = parse_crop)]
    pub crop: Option<(usize, usize)>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    /// Match distance in pixels (default 1).
    #[arg(long, conflicts_with = "tol_ratio")]
    pub tol_px: Option<f64>,
    /// Match distance as a fraction of the image diagonal.
    #[arg(long)]
    pub tol_ratio: Option<f64>,
    /// optimal or greedy.
    #[arg(long, default_value = "optimal")]
    pub matching: Matching,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated balance values.
    #[arg(long, default_value = DEFAULT_B_VALUES)]
    pub b_values: String,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub wd: f64,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value = "detached")]
    pub grad_mode: GradMode,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    /// A run_manifest.json written by any other subcommand.
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_crop(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got '{s}'"))?;
    let h = h.trim().parse().map_err(|_| format!("bad crop height '{h}'"))?;
    let w = w.trim().parse().map_err(|_| format!("bad crop width '{w}'"))?;
    Ok((h, w))
}

/// Parses a comma-separated list of finite, nonnegative balance values.
pub fn parse_b_values(s: &str) -> Result<Vec<f64>, String> {
    let values = s
        .split(',')
        .map(|part| {
            let part = part.trim();
            let v: f64 = part.parse().map_err(|_| format!("bad b value '{part}'"))?;
            if !v.is_finite() || v < 0.0 {
                return Err(format!("b must be finite and nonnegative, got {part}"));
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("no b values".into());
    }
    Ok(values)
}
