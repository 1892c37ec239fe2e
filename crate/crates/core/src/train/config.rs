use serde::{Deserialize, Serialize};

use super::AdamConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub initial_lr: f64,
    /// Epochs at which the rate is divided by `decay_factor`.
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    pub total_epochs: usize,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub label_smoothing: f64,
    /// Drives parameter init and the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::full()
    }
}

impl TrainConfig {
    /// 120 epochs, decays at 40 and 80.
    pub fn full() -> Self {
        TrainConfig {
            initial_lr: 0.001,
            decay_epochs: vec![40, 80],
            decay_factor: 10.0,
            total_epochs: 120,
            weight_decay: 1e-4,
            batch_size: 32,
            label_smoothing: 0.05,
            seed: 0,
        }
    }

    /// 30 epochs, decays at 15 and 25, batches of 8.
    pub fn desk() -> Self {
        TrainConfig {
            decay_epochs: vec![15, 25],
            total_epochs: 30,
            batch_size: 8,
            ..TrainConfig::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_epochs == 0 || self.batch_size == 0 {
            return Err(Error::contract("total_epochs and batch_size must be positive"));
        }
        if !(self.initial_lr.is_finite() && self.initial_lr > 0.0) {
            return Err(Error::contract("initial_lr must be positive"));
        }
        if !(self.decay_factor.is_finite() && self.decay_factor > 0.0) {
            return Err(Error::contract("decay_factor must be positive"));
        }
        if self.decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::contract("decay_epochs must be strictly increasing"));
        }
        if self.decay_epochs.last().is_some_and(|&e| e >= self.total_epochs) {
            return Err(Error::contract("decay_epochs must lie below total_epochs"));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::contract("label_smoothing must be in [0, 1)"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::contract("weight_decay must be non-negative"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

/// Step schedule: `initial_lr / decay_factor^(#decay epochs ≤ epoch)`.
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch >= cfg.total_epochs {
        return Err(Error::contract(format!(
            "epoch {} outside a {}-epoch schedule",
            epoch, cfg.total_epochs
        )));
    }
    let decays = cfg.decay_epochs.iter().filter(|&&d| d <= epoch).count();
    Ok(cfg.initial_lr / cfg.decay_factor.powi(decays as i32))
}
