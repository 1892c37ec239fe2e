use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{adam_step, lr_at_epoch, smoothed_ce_loss, AdamState, EvalReport, TrainConfig};
use crate::data::{preprocess, Dataset, PreprocessConfig, Split};
use crate::error::{Error, Result};
use crate::graph::JointGraphTopology;
use crate::model::{Checkpoint, ModelConfig, Network, Params};
use crate::noise::mix_seed;
use crate::tape::Tape;
use crate::tensor::Tensor;

const INIT_SALT: u64 = 0x1417;
const SHUFFLE_SALT: u64 = 0x5EED_0000;

/// A preprocessed sample ready for the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub label: usize,
    pub features: Tensor,
}

/// Preprocesses one split of `dataset`.
pub fn prepare(dataset: &Dataset, split: Split, cfg: &PreprocessConfig) -> Result<Vec<Sample>> {
    cfg.validate()?;
    dataset
        .split(split)
        .par_iter()
        .map(|s| {
            Ok(Sample {
                id: s.sample_id().to_string(),
                label: s.label(),
                features: preprocess(s, cfg)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean per-sample loss seen during the epoch.
    pub train_loss: f64,
    pub test_top1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub final_checkpoint: Checkpoint,
    /// Highest test top-1; the earliest epoch wins ties.
    pub best_checkpoint: Checkpoint,
    pub log: Vec<EpochLog>,
    /// Test-split evaluation of the final checkpoint.
    pub report: EvalReport,
}

/// Mean smoothed loss and mean gradients over `batch`, one tape per sample.
/// Samples run in parallel; gradients are reduced in batch order.
pub fn batch_gradients(
    network: &Network,
    params: &Params,
    batch: &[&Sample],
    label_smoothing: f64,
) -> Result<(f64, Vec<Tensor>)> {
    if batch.is_empty() {
        return Err(Error::contract("empty batch"));
    }
    let per_sample: Vec<(f64, Vec<Tensor>)> = batch
        .par_iter()
        .map(|s| {
            let mut tape = Tape::new();
            let pass = network.forward(&mut tape, params, &s.features, true)?;
            let loss = smoothed_ce_loss(&mut tape, pass.logits, s.label, label_smoothing)?;
            let value = tape.value(loss).item()?;
            let mut grads = tape.gradients(loss)?;
            let g = pass
                .params
                .iter()
                .map(|&v| grads.take(v).expect("parameters are tracked leaves"))
                .collect();
            Ok((value, g))
        })
        .collect::<Result<_>>()?;

    let inv = 1.0 / batch.len() as f64;
    let mut iter = per_sample.into_iter();
    let (mut loss, mut sum) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        for (acc, gi) in sum.iter_mut().zip(&g) {
            acc.data_mut().iter_mut().zip(gi.data()).for_each(|(a, b)| *a += b);
        }
    }
    for t in &mut sum {
        t.data_mut().iter_mut().for_each(|v| *v *= inv);
    }
    Ok((loss * inv, sum))
}

/// Preprocesses `dataset` and trains on its train split, scoring the test
/// split after every epoch.
pub fn train(
    model: &ModelConfig,
    cfg: &TrainConfig,
    dataset: &Dataset,
    preprocess_cfg: &PreprocessConfig,
) -> Result<TrainOutcome> {
    let train_set = prepare(dataset, Split::Train, preprocess_cfg)?;
    let test_set = prepare(dataset, Split::Test, preprocess_cfg)?;
    train_samples(model, dataset.topology(), cfg, &train_set, &test_set)
}

pub fn train_samples(
    model: &ModelConfig,
    topology: &JointGraphTopology,
    cfg: &TrainConfig,
    train_set: &[Sample],
    test_set: &[Sample],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::contract("training split is empty"));
    }
    if test_set.is_empty() {
        return Err(Error::contract("test split is empty"));
    }
    check_samples(model, train_set.iter().chain(test_set))?;

    let mut ckpt = Checkpoint::init(model, topology, mix_seed(cfg.seed, INIT_SALT))?;
    let network = ckpt.network()?;
    let mut state = AdamState::new(&ckpt.params);
    let adam = cfg.adam();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::with_capacity(cfg.total_epochs);
    let mut best: Option<(f64, Checkpoint)> = None;

    for epoch in 0..cfg.total_epochs {
        let lr = lr_at_epoch(cfg, epoch)?;
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, SHUFFLE_SALT + epoch as u64)));
        let mut loss_sum = 0.0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = batch_gradients(&network, &ckpt.params, &batch, cfg.label_smoothing)
                .map_err(|e| match e {
                    Error::NonFinite(_) => Error::Divergence {
                        epoch,
                        step,
                        loss: f64::NAN,
                    },
                    other => other,
                })?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, step, loss });
            }
            loss_sum += loss * batch.len() as f64;
            adam_step(&mut ckpt.params, &grads, &mut state, lr, &adam)?;
        }
        ckpt.epoch = epoch + 1;
        let report = evaluate_with(&network, &ckpt, test_set)?;
        log.push(EpochLog {
            epoch,
            lr,
            train_loss: loss_sum / train_set.len() as f64,
            test_top1: report.top1_accuracy,
        });
        if best.as_ref().is_none_or(|(acc, _)| report.top1_accuracy > *acc) {
            let mut snapshot = ckpt.clone();
            snapshot.optimizer = Some(state.clone());
            best = Some((report.top1_accuracy, snapshot));
        }
    }
    ckpt.optimizer = Some(state);
    let report = evaluate_with(&network, &ckpt, test_set)?;
    Ok(TrainOutcome {
        final_checkpoint: ckpt,
        best_checkpoint: best.expect("at least one epoch").1,
        log,
        report,
    })
}

/// Scores one split of `dataset` under `checkpoint`.
pub fn evaluate(
    checkpoint: &Checkpoint,
    dataset: &Dataset,
    split: Split,
    preprocess_cfg: &PreprocessConfig,
) -> Result<EvalReport> {
    if dataset.topology().n_joints() != checkpoint.config.n_joints {
        return Err(Error::contract(format!(
            "checkpoint expects {} joints, dataset has {}",
            checkpoint.config.n_joints,
            dataset.topology().n_joints()
        )));
    }
    let samples = prepare(dataset, split, preprocess_cfg)?;
    evaluate_samples(checkpoint, &samples)
}

pub fn evaluate_samples(checkpoint: &Checkpoint, samples: &[Sample]) -> Result<EvalReport> {
    evaluate_with(&checkpoint.network()?, checkpoint, samples)
}

fn evaluate_with(network: &Network, checkpoint: &Checkpoint, samples: &[Sample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::contract("cannot evaluate an empty sample set"));
    }
    check_samples(&checkpoint.config, samples.iter())?;
    let predicted: Vec<usize> = samples
        .par_iter()
        .map(|s| Ok(argmax(network.logits(&checkpoint.params, &s.features)?.data())))
        .collect::<Result<_>>()?;
    let labelled: Vec<(String, usize, usize)> = samples
        .iter()
        .zip(predicted)
        .map(|(s, p)| (s.id.clone(), s.label, p))
        .collect();
    EvalReport::from_predictions(checkpoint.config.class_count, labelled)
}

fn check_samples<'a>(model: &ModelConfig, samples: impl Iterator<Item = &'a Sample>) -> Result<()> {
    for s in samples {
        let shape = s.features.shape();
        if shape.len() != 3 || shape[1] != model.n_joints || shape[2] != model.in_channels {
            return Err(Error::contract(format!(
                "sample `{}` has features {:?}, model expects [T, {}, {}]",
                s.id, shape, model.n_joints, model.in_channels
            )));
        }
        if s.label >= model.class_count {
            return Err(Error::contract(format!(
                "sample `{}` has label {} but the model has {} classes",
                s.id, s.label, model.class_count
            )));
        }
    }
    Ok(())
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
