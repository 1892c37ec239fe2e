use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use skgcn::graph::{AdjacencyVariant, Normalization, TemporalLinks};
use skgcn::model::Activation;
use skgcn::noise::{NoiseKind, NoiseSpec};

#[derive(Debug, Parser)]
#[command(name = "skgcn", version, about = "Skeleton action recognition with graph convolutions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic skeleton dataset.
    GenData(GenDataArgs),
    /// Train one model and write a run directory.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset split.
    Evaluate(EvaluateArgs),
    /// Train and test across noise levels and adjacency variants.
    NoiseSweep(SweepArgs),
    /// Inspect learned residuals or compare two prediction files.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..))]
    pub classes: u64,
    #[arg(long, default_value_t = 12)]
    pub joints: usize,
    #[arg(long, default_value_t = 40)]
    pub frames: usize,
    #[arg(long, default_value_t = 50)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 20)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 3)]
    pub channels: usize,
    #[arg(long, default_value_t = 0.5)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0.02)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

/// Overrides on top of the config file (or the built-in defaults).
#[derive(Debug, Default, Args)]
pub struct ExperimentArgs {
    /// Base config file; flags below override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory or manifest file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Adjacency used by all three GCN layers.
    #[arg(long)]
    pub adjacency: Option<AdjacencyVariant>,
    /// Per-layer adjacency, e.g. `identity+res,identity,skeleton`.
    #[arg(long, value_delimiter = ',')]
    pub layer_adjacency: Option<Vec<AdjacencyVariant>>,
    /// Frames per spatial-temporal window (1 = spatial only).
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub temporal_adjacency: Option<AdjacencyVariant>,
    #[arg(long)]
    pub temporal_links: Option<TemporalLinks>,
    /// GCN widths, e.g. `64,64,128`.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<usize>>,
    #[arg(long)]
    pub temporal_kernel: Option<usize>,
    #[arg(long)]
    pub temporal_pool: Option<usize>,
    #[arg(long)]
    pub activation: Option<Activation>,
    #[arg(long)]
    pub normalization: Option<Normalization>,
    /// Use the 120-epoch schedule with decays at 40 and 80.
    #[arg(long, visible_alias = "paper-schedule")]
    pub full_schedule: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs at which the rate drops, e.g. `15,25`; `none` for a flat rate.
    #[arg(long, value_parser = parse_epochs)]
    pub decay_epochs: Option<Epochs>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub label_smoothing: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub no_velocity: bool,
    #[arg(long)]
    pub center_joint: Option<usize>,
    /// Apply noise to the test split only.
    #[arg(long)]
    pub test_only_noise: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Noise as `kind:count:seed`; repeatable.
    #[arg(long, value_parser = parse_noise)]
    pub noise: Vec<NoiseSpec>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Run config supplying preprocessing; defaults otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Predictions CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long)]
    pub kind: NoiseKind,
    /// Noise counts, e.g. `0,2,4,6`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub levels: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub variants: Vec<AdjacencyVariant>,
    /// Seeds for both noise and training; one row per seed.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Checkpoint whose residual matrices to report.
    #[arg(long, conflicts_with = "diff", required_unless_present = "diff")]
    pub residual: Option<PathBuf>,
    /// Edges per layer (default: directed skeleton edge count).
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Two prediction files: samples right under the first, wrong under the second.
    #[arg(long, num_args = 2, value_names = ["A", "B"], requires = "data")]
    pub diff: Option<Vec<PathBuf>>,
    /// Dataset supplying class names for --diff.
    #[arg(long, requires = "diff")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub top_m: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Epochs(pub Vec<usize>);

pub fn parse_epochs(s: &str) -> Result<Epochs, String> {
    if s.is_empty() || s == "none" {
        return Ok(Epochs(Vec::new()));
    }
    s.split(',')
        .map(|e| e.trim().parse().map_err(|err| format!("epoch `{}`: {}", e, err)))
        .collect::<Result<_, _>>()
        .map(Epochs)
}

pub fn parse_noise(s: &str) -> Result<NoiseSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [kind, count, seed] = parts.as_slice() else {
        return Err(format!("expected kind:count:seed, got `{}`", s));
    };
    Ok(NoiseSpec::new(
        kind.parse()?,
        count.parse().map_err(|e| format!("count `{}`: {}", count, e))?,
        seed.parse().map_err(|e| format!("seed `{}`: {}", seed, e))?,
    ))
}
