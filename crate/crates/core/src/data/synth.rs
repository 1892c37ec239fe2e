//! Deterministic synthetic action datasets.
//!
//! Each class moves a small set of one to three joints along a periodic
//! path with its own direction and tempo; every other joint holds a rest
//! pose. All joints get Gaussian jitter. Everything is derived from one seed.

use std::f64::consts::PI;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, SkeletonSequence};
use crate::error::{Error, Result};
use crate::graph::JointGraphTopology;
use crate::noise::mix_seed;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub n_joints: usize,
    pub n_frames: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Coordinate channels per joint (2 or 3).
    pub channels: usize,
    /// Peak displacement of a moving joint.
    pub amplitude: f64,
    /// Standard deviation of per-coordinate jitter.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_classes: 4,
            n_joints: 12,
            n_frames: 40,
            train_per_class: 50,
            test_per_class: 20,
            channels: 3,
            amplitude: 0.5,
            jitter: 0.02,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::contract("synthetic data needs at least 2 classes"));
        }
        if self.n_joints == 0 || self.n_frames == 0 {
            return Err(Error::contract("joints and frames must be positive"));
        }
        if !(self.channels == 2 || self.channels == 3) {
            return Err(Error::contract("channels must be 2 or 3"));
        }
        if !(self.amplitude.is_finite() && self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::contract("amplitude and jitter must be finite, jitter non-negative"));
        }
        Ok(())
    }
}

/// Motion shared by every sample of one class.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassMotion {
    pub joints: Vec<usize>,
    pub direction: Vec<f64>,
    /// Oscillation cycles over the whole sequence.
    pub cycles: f64,
}

/// Per-class motion profiles. Moving-joint sets are pairwise disjoint
/// whenever `n_joints ≥ 3 · n_classes`.
pub fn class_motions(cfg: &SynthConfig) -> Result<Vec<ClassMotion>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0));
    let k = cfg.n_classes;
    let mut perm: Vec<usize> = (0..cfg.n_joints).collect();
    perm.shuffle(&mut rng);
    let disjoint = cfg.n_joints >= 3 * k;
    let mut cursor = 0;
    let mut motions = Vec::with_capacity(k);
    for class in 0..k {
        let size = (1 + class % 3).min(cfg.n_joints);
        let joints = if disjoint {
            let js = perm[cursor..cursor + size].to_vec();
            cursor += size;
            js
        } else {
            index::sample(&mut rng, cfg.n_joints, size).into_vec()
        };
        let direction = random_unit(&mut rng, cfg.channels);
        let cycles = 1.0 + 2.0 * class as f64 / (k - 1) as f64;
        motions.push(ClassMotion {
            joints,
            direction,
            cycles,
        });
    }
    Ok(motions)
}

/// Generates a dataset: `train_per_class` and `test_per_class` samples per
/// class, ids `train-c<k>-<i>` and `test-c<k>-<i>`.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset> {
    let motions = class_motions(cfg)?;
    let topology = JointGraphTopology::default_for(cfg.n_joints)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1));
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let rest: Vec<f64> = (0..cfg.n_joints * cfg.channels).map(|_| unit.sample(&mut rng)).collect();

    let mut salt = 2;
    let mut splits = [Vec::new(), Vec::new()];
    for (split_idx, (name, per_class)) in [("train", cfg.train_per_class), ("test", cfg.test_per_class)]
        .into_iter()
        .enumerate()
    {
        for (class, motion) in motions.iter().enumerate() {
            for i in 0..per_class {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, salt));
                salt += 1;
                let coords = sample_coords(cfg, motion, &rest, &mut rng);
                let id = format!("{}-c{}-{:04}", name, class, i);
                splits[split_idx].push(SkeletonSequence::new(id, class, coords)?);
            }
        }
    }
    let [train, test] = splits;
    let class_names = (0..cfg.n_classes).map(|k| format!("action{}", k)).collect();
    Dataset::new(class_names, topology, train, test)
}

fn sample_coords(cfg: &SynthConfig, motion: &ClassMotion, rest: &[f64], rng: &mut ChaCha8Rng) -> Tensor {
    let (t, n, c) = (cfg.n_frames, cfg.n_joints, cfg.channels);
    let phase = rng.random_range(0.0..2.0 * PI);
    let amplitude = cfg.amplitude * rng.random_range(0.8..1.2);
    let cycles = motion.cycles * rng.random_range(0.9..1.1);
    let offset_dist = Normal::new(0.0, 0.1).expect("valid normal");
    let offset: Vec<f64> = (0..c).map(|_| offset_dist.sample(rng)).collect();
    let jitter = Normal::new(0.0, cfg.jitter.max(f64::MIN_POSITIVE)).expect("valid normal");

    let mut data = Vec::with_capacity(t * n * c);
    for frame in 0..t {
        let angle = 2.0 * PI * cycles * frame as f64 / t as f64 + phase;
        for joint in 0..n {
            let lag = motion.joints.iter().position(|&j| j == joint);
            for ch in 0..c {
                let mut v = rest[joint * c + ch] + offset[ch];
                if let Some(r) = lag {
                    v += amplitude * (angle + r as f64 * PI / 3.0).sin() * motion.direction[ch];
                }
                if cfg.jitter > 0.0 {
                    v += jitter.sample(rng);
                }
                data.push(v);
            }
        }
    }
    Tensor::new(vec![t, n, c], data).expect("t*n*c values")
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    loop {
        let v: Vec<f64> = (0..dim).map(|_| unit.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
