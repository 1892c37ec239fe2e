use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use sha2::{Digest, Sha256};
use skgcn::analysis::{export_edges, misclassification_diff, residual_report, EdgeFormat};
use skgcn::data::{corrupt_dataset, Dataset, DatasetManifest, Split, SynthConfig, MANIFEST_FILE};
use skgcn::model::Checkpoint;
use skgcn::noise::NoiseSpec;
use skgcn::train::{
    evaluate, evaluate_samples, prepare, read_predictions_csv, train_samples, write_epoch_log_csv,
    write_predictions_csv, EvalReport, TrainConfig, TrainOutcome,
};

use crate::args::{AnalyzeArgs, EvaluateArgs, ExperimentArgs, GenDataArgs, SweepArgs, TrainArgs};
use crate::config::ExperimentConfig;

pub const FINAL_CHECKPOINT: &str = "final.skckpt";
pub const BEST_CHECKPOINT: &str = "best.skckpt";
pub const HASH_FILE: &str = "checkpoint.sha256";

/// Creates `dir`, refusing one that already has entries unless `force`.
fn prepare_out_dir(dir: &Path, force: bool) -> anyhow::Result<()> {
    if dir.is_dir() && std::fs::read_dir(dir)?.next().is_some() && !force {
        bail!("{} is not empty (pass --force to write into it)", dir.display());
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn gen_data(args: &GenDataArgs) -> anyhow::Result<PathBuf> {
    let cfg = SynthConfig {
        n_classes: args.classes as usize,
        n_joints: args.joints,
        n_frames: args.frames,
        train_per_class: args.train_per_class,
        test_per_class: args.test_per_class,
        channels: args.channels,
        amplitude: args.amplitude,
        jitter: args.jitter,
        seed: args.seed,
    };
    let dataset = skgcn::data::synth_generate(&cfg)?;
    prepare_out_dir(&args.out, args.force)?;
    let manifest = dataset.save(&args.out)?;
    std::fs::write(args.out.join("synth.toml"), toml::to_string(&cfg)?)?;
    Ok(manifest)
}

impl ExperimentArgs {
    /// The config file (or defaults) with every given flag applied.
    pub fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if self.full_schedule {
            cfg.train = TrainConfig {
                seed: cfg.train.seed,
                ..TrainConfig::full()
            };
        }
        if let Some(v) = &self.data {
            cfg.paths.data = Some(v.clone());
        }
        let m = &mut cfg.model;
        if let Some(v) = self.adjacency {
            m.adjacency = [v; 3];
        }
        if let Some(v) = &self.layer_adjacency {
            m.adjacency = three("--layer-adjacency", v)?;
        }
        if let Some(v) = &self.channels {
            m.gcn_channels = three("--channels", v)?;
        }
        set(&mut m.tau, self.tau);
        set(&mut m.temporal_adjacency, self.temporal_adjacency);
        set(&mut m.temporal_links, self.temporal_links);
        set(&mut m.temporal_kernel, self.temporal_kernel);
        set(&mut m.temporal_pool, self.temporal_pool);
        set(&mut m.activation, self.activation);
        set(&mut m.normalization, self.normalization);
        let t = &mut cfg.train;
        set(&mut t.total_epochs, self.epochs);
        set(&mut t.decay_epochs, self.decay_epochs.clone().map(|e| e.0));
        set(&mut t.initial_lr, self.lr);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.weight_decay, self.weight_decay);
        set(&mut t.label_smoothing, self.label_smoothing);
        set(&mut t.seed, self.seed);
        let p = &mut cfg.preprocess;
        set(&mut p.target_frames, self.frames);
        if self.no_velocity {
            p.with_velocity = false;
        }
        if self.center_joint.is_some() {
            p.center_joint = self.center_joint;
        }
        if self.test_only_noise {
            cfg.noise.test_only = true;
        }
        Ok(cfg)
    }
}

fn three<T: Copy>(flag: &str, v: &[T]) -> anyhow::Result<[T; 3]> {
    match v {
        &[a, b, c] => Ok([a, b, c]),
        _ => bail!("{} takes exactly 3 comma-separated values, got {}", flag, v.len()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> anyhow::Result<Dataset> {
    let Some(path) = &cfg.paths.data else {
        bail!("no dataset given (use --data or set paths.data)");
    };
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

pub struct Run {
    pub outcome: TrainOutcome,
    /// Final checkpoint scored on the corrupted test split.
    pub report: EvalReport,
}

/// Trains on `clean` after applying the configured noise. With
/// `noise.test_only`, sequence noise skips the training split and wrong
/// edges enter only at final evaluation.
pub fn run_experiment(cfg: &mut ExperimentConfig, clean: &Dataset) -> anyhow::Result<Run> {
    let channels = cfg.preprocess.feature_channels(clean.channels());
    let model = cfg
        .model
        .resolve(clean.topology().n_joints(), channels, clean.n_classes())?;
    let mut noisy = clean.clone();
    for spec in &cfg.noise.specs {
        noisy = corrupt_dataset(&noisy, spec, cfg.noise.test_only)
            .with_context(|| format!("applying {} noise", spec.kind))?;
    }
    let train_topology = if cfg.noise.test_only {
        clean.topology()
    } else {
        noisy.topology()
    };
    let train_set = prepare(&noisy, Split::Train, &cfg.preprocess)?;
    let test_set = prepare(&noisy, Split::Test, &cfg.preprocess)?;
    let outcome = train_samples(&model, train_topology, &cfg.train, &train_set, &test_set)?;
    let report = if train_topology == noisy.topology() {
        outcome.report.clone()
    } else {
        let mut swapped = outcome.final_checkpoint.clone();
        swapped.topology = noisy.topology().clone();
        evaluate_samples(&swapped, &test_set)?
    };
    Ok(Run { outcome, report })
}

pub struct TrainSummary {
    pub out: PathBuf,
    pub top1: f64,
    pub best_top1: f64,
    pub best_epoch: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{:02x}", b)).collect()
}

pub fn train(args: &TrainArgs) -> anyhow::Result<TrainSummary> {
    let mut cfg = args.experiment.resolve()?;
    if !args.noise.is_empty() {
        cfg.noise.specs = args.noise.clone();
    }
    if let Some(out) = &args.out {
        cfg.paths.output = Some(out.clone());
    }
    let Some(out) = cfg.paths.output.clone() else {
        bail!("no run directory given (use --out or set paths.output)");
    };
    let dataset = load_dataset(&cfg)?;
    prepare_out_dir(&out, args.force)?;
    let run = run_experiment(&mut cfg, &dataset)?;

    cfg.save(&out.join("config.toml"))?;
    write_epoch_log_csv(out.join("epochs.csv"), &run.outcome.log)?;
    write_predictions_csv(out.join("predictions.csv"), &run.report.predictions)?;
    let text = run.outcome.final_checkpoint.to_text();
    std::fs::write(out.join(FINAL_CHECKPOINT), &text)?;
    run.outcome.best_checkpoint.save(out.join(BEST_CHECKPOINT))?;
    let sha256 = sha256_hex(text.as_bytes());
    std::fs::write(out.join(HASH_FILE), format!("{}  {}\n", sha256, FINAL_CHECKPOINT))?;

    let best = run.outcome.best_checkpoint.epoch;
    Ok(TrainSummary {
        out,
        top1: run.report.top1_accuracy,
        best_top1: run.outcome.log[best - 1].test_top1,
        best_epoch: best,
        sha256,
    })
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> anyhow::Result<EvalReport> {
    let ckpt = Checkpoint::load(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let preprocess = match &args.config {
        Some(path) => ExperimentConfig::load(path)?.preprocess,
        None => Default::default(),
    };
    let split: Split = args.split.parse().map_err(anyhow::Error::msg)?;
    let dataset = Dataset::load(&args.data).with_context(|| format!("loading dataset {}", args.data.display()))?;
    let report = evaluate(&ckpt, &dataset, split, &preprocess)?;
    if let Some(out) = &args.out {
        write_predictions_csv(out, &report.predictions)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub variant: String,
    pub kind: String,
    pub level: usize,
    pub seed: u64,
    pub test_top1: f64,
}

/// One training run per (variant, level, seed); the seed drives both the
/// noise and the model. Rows are also passed to `progress` as they finish.
pub fn noise_sweep(args: &SweepArgs, mut progress: impl FnMut(&SweepRow)) -> anyhow::Result<Vec<SweepRow>> {
    let base = args.experiment.resolve()?;
    let dataset = load_dataset(&base)?;
    prepare_out_dir(&args.out, args.force)?;
    base.save(&args.out.join("config.toml"))?;
    let mut rows = Vec::new();
    for &variant in &args.variants {
        for &level in &args.levels {
            for &seed in &args.seeds {
                let mut cfg = base.clone();
                cfg.model.adjacency = [variant; 3];
                cfg.train.seed = seed;
                cfg.noise.specs = if level == 0 {
                    Vec::new()
                } else {
                    vec![NoiseSpec::new(args.kind, level, seed)]
                };
                let run = run_experiment(&mut cfg, &dataset)
                    .with_context(|| format!("{} at {} level {} seed {}", variant, args.kind, level, seed))?;
                let row = SweepRow {
                    variant: variant.to_string(),
                    kind: args.kind.to_string(),
                    level,
                    seed,
                    test_top1: run.report.top1_accuracy,
                };
                progress(&row);
                rows.push(row);
            }
        }
    }
    let mut w = csv::Writer::from_path(args.out.join("sweep.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(rows)
}

#[derive(Serialize)]
struct SummaryRow {
    layer: usize,
    edges: usize,
    asymmetry: f64,
    negative_fraction: f64,
    self_loops: usize,
}

/// Writes residual or diff reports into `args.out`; returns the files written.
pub fn analyze(args: &AnalyzeArgs) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&args.out)?;
    if let Some(path) = &args.residual {
        let ckpt = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
        let report = residual_report(&ckpt, args.top_k)?;
        let csv_path = args.out.join("residual_edges.csv");
        let dot_path = args.out.join("residual.dot");
        let summary_path = args.out.join("residual_summary.csv");
        export_edges(&report, &csv_path, EdgeFormat::Csv)?;
        export_edges(&report, &dot_path, EdgeFormat::Dot)?;
        let mut w = csv::Writer::from_path(&summary_path)?;
        for l in &report.layers {
            w.serialize(SummaryRow {
                layer: l.layer,
                edges: l.edges.len(),
                asymmetry: l.asymmetry,
                negative_fraction: l.negative_fraction,
                self_loops: l.self_loops,
            })?;
        }
        w.flush()?;
        return Ok(vec![csv_path, dot_path, summary_path]);
    }
    let (Some(files), Some(data)) = (&args.diff, &args.data) else {
        bail!("give --residual CKPT or --diff A B --data DIR");
    };
    let manifest_path = if data.is_dir() { data.join(MANIFEST_FILE) } else { data.clone() };
    let manifest = DatasetManifest::load(&manifest_path)
        .with_context(|| format!("loading manifest {}", manifest_path.display()))?;
    let a = read_predictions_csv(&files[0]).with_context(|| format!("reading {}", files[0].display()))?;
    let b = read_predictions_csv(&files[1]).with_context(|| format!("reading {}", files[1].display()))?;
    let report = misclassification_diff(&a, &b, &manifest.class_names, args.top_m)?;
    let path = args.out.join("diff.csv");
    report.save_csv(&path)?;
    Ok(vec![path])
}
