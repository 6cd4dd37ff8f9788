use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isodyn::{Activation, GrowthPolicy, Schedule};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "isodyn", version, about = "Isotropic MLPs with function-preserving width adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a freshly initialised checkpoint.
    Init(InitArgs),
    /// Train a network and write per-epoch metrics and a checkpoint.
    Train(TrainArgs),
    /// Pretrain (optionally), then train while the scheduler grows or prunes neurons.
    Adapt(AdaptArgs),
    /// Run the invariance suites against a checkpoint.
    Verify(VerifyArgs),
    /// Rewrite alternate layers in diagonal form and report parameter counts.
    Sparsify(SparsifyArgs),
    /// Tabulate the one-step divergence between a layer and its factored form.
    Divergence(DivergenceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ActivationArg {
    IsoTanh,
    AnisoTanh,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::IsoTanh => Activation::IsoTanh,
            ActivationArg::AnisoTanh => Activation::AnisoTanh,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive and finite, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// Comma-separated list of positive widths.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Widths(pub Vec<usize>);

fn widths(s: &str) -> Result<Widths, String> {
    let w = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if w.len() < 2 || w.contains(&0) {
        return Err("needs at least two positive comma-separated widths".into());
    }
    Ok(Widths(w))
}

/// `TRAIN` or `TRAIN,TEST`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subset {
    pub train: usize,
    pub test: Option<usize>,
}

fn subset(s: &str) -> Result<Subset, String> {
    let mut parts = s.split(',');
    let train = positive_usize(parts.next().unwrap_or_default())?;
    let test = parts.next().map(positive_usize).transpose()?;
    if parts.next().is_some() {
        return Err("expected TRAIN or TRAIN,TEST".into());
    }
    Ok(Subset { train, test })
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Directory with the CIFAR-10 binary batches.
    #[arg(long, env = "ISODYN_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Seeded subset sizes, `TRAIN` or `TRAIN,TEST` (test defaults to TRAIN/5).
    #[arg(long, value_parser = subset)]
    pub subset: Option<Subset>,
    /// Use this many synthetic Gaussian samples (80/20 split) instead of CIFAR-10.
    #[arg(long, value_parser = positive_usize)]
    pub synthetic: Option<usize>,
    #[arg(long, default_value_t = 32, value_parser = positive_usize)]
    pub synthetic_dim: usize,
    #[arg(long, default_value_t = 10, value_parser = positive_usize)]
    pub synthetic_classes: usize,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Comma-separated layer widths, e.g. `3072,16,10`. Defaults to one hidden layer of 16.
    #[arg(long, value_parser = widths)]
    pub arch: Option<Widths>,
    #[arg(long, value_enum, default_value_t = ActivationArg::IsoTanh)]
    pub activation: ActivationArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 0.08, value_parser = positive_f64)]
    pub lr: f64,
    #[arg(long, default_value_t = 24, value_parser = positive_usize)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct PlanArgs {
    /// Ξ: below-threshold neurons to keep per hidden layer.
    #[arg(long, default_value_t = 0)]
    pub xi: usize,
    /// ϑ: singular-value threshold.
    #[arg(long, default_value_t = 1e-3, value_parser = positive_f64)]
    pub theta: f64,
    #[arg(long, default_value_t = GrowthPolicy::SemiOrthogonal)]
    pub growth_policy: GrowthPolicy,
    /// `threshold` or `fixed:<width>`.
    #[arg(long, default_value_t = Schedule::Threshold)]
    pub schedule: Schedule,
    /// Bias of a grown neuron; needs b*² below the block's intrinsic length.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub b_star: f64,
    /// Epochs between scheduler checks.
    #[arg(long, default_value_t = 1, value_parser = positive_usize)]
    pub cadence: usize,
    /// Least-squares correction of the following layer on prune.
    #[arg(long)]
    pub pinv: bool,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    /// Start from this checkpoint instead of a fresh network.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Epochs of plain training before adaptation starts.
    #[arg(long, default_value_t = 0)]
    pub pretrain_epochs: usize,
    /// Adaptation epochs.
    #[arg(long, default_value_t = 12)]
    pub epochs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SparsifyArgs {
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize, Deserialize)]
pub struct DivergenceArgs {
    /// `M,K,N`: W is M×N, factored as A (M×K) times B (K×N).
    #[arg(long, default_value = "4,4,4", value_parser = widths)]
    pub dims: Widths,
    /// Comma-separated step sizes.
    #[arg(long, default_value = "0,0.001,0.01,0.1,0.5", value_delimiter = ',')]
    pub etas: Vec<f64>,
    /// Independent random instances per step size.
    #[arg(long, default_value_t = 1, value_parser = positive_usize)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV output file.
    #[arg(long)]
    pub out: PathBuf,
}
