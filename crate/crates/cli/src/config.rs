//! Experiment configuration file.
//!
//! TOML with five sections; every key is optional on input and filled from
//! defaults, and a run writes back the fully resolved file it used:
//!
//! ```toml
//! [paths]
//! data = "data/synth"
//! output = "runs/ires"
//!
//! [model]
//! gcn_channels = [64, 64, 128]
//! adjacency = ["identity+res", "identity+res", "identity+res"]
//! tau = 1
//!
//! [train]
//! total_epochs = 30
//! decay_epochs = [15, 25]
//! seed = 0
//!
//! [preprocess]
//! target_frames = 40
//! with_velocity = true
//!
//! [noise]
//! test_only = false
//! [[noise.specs]]
//! kind = "wrong-edges"
//! count = 4
//! seed = 1
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use skgcn::data::PreprocessConfig;
use skgcn::graph::{AdjacencyVariant, Normalization, TemporalLinks};
use skgcn::model::{Activation, ModelConfig};
use skgcn::noise::NoiseSpec;
use skgcn::train::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Model options. The three size fields are derived from the dataset when
/// absent and checked against it when present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_joints: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_count: Option<usize>,
    pub gcn_channels: [usize; 3],
    pub adjacency: [AdjacencyVariant; 3],
    pub tau: usize,
    pub temporal_adjacency: AdjacencyVariant,
    pub temporal_links: TemporalLinks,
    pub temporal_kernel: usize,
    pub temporal_pool: usize,
    pub activation: Activation,
    pub normalization: Normalization,
    pub residual_init_scale: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        let m = ModelConfig::new(0, 0, 0);
        ModelSpec {
            n_joints: None,
            in_channels: None,
            class_count: None,
            gcn_channels: m.gcn_channels,
            adjacency: m.adjacency,
            tau: m.tau,
            temporal_adjacency: m.temporal_adjacency,
            temporal_links: m.temporal_links,
            temporal_kernel: m.temporal_kernel,
            temporal_pool: m.temporal_pool,
            activation: m.activation,
            normalization: m.normalization,
            residual_init_scale: m.residual_init_scale,
        }
    }
}

impl ModelSpec {
    /// Completes the spec with sizes taken from the data, failing on any
    /// disagreement with sizes already set.
    pub fn resolve(&mut self, n_joints: usize, in_channels: usize, class_count: usize) -> anyhow::Result<ModelConfig> {
        for (name, slot, actual) in [
            ("n_joints", &mut self.n_joints, n_joints),
            ("in_channels", &mut self.in_channels, in_channels),
            ("class_count", &mut self.class_count, class_count),
        ] {
            match *slot {
                Some(v) if v != actual => {
                    bail!("config sets model.{} = {} but the data gives {}", name, v, actual)
                }
                _ => *slot = Some(actual),
            }
        }
        let cfg = ModelConfig {
            n_joints,
            in_channels,
            class_count,
            gcn_channels: self.gcn_channels,
            adjacency: self.adjacency,
            tau: self.tau,
            temporal_adjacency: self.temporal_adjacency,
            temporal_links: self.temporal_links,
            temporal_kernel: self.temporal_kernel,
            temporal_pool: self.temporal_pool,
            activation: self.activation,
            normalization: self.normalization,
            residual_init_scale: self.residual_init_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    /// Applied to the training split too unless `test_only` is set.
    pub test_only: bool,
    pub specs: Vec<NoiseSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub paths: Paths,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub preprocess: PreprocessConfig,
    pub noise: NoiseSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            paths: Paths::default(),
            model: ModelSpec::default(),
            train: TrainConfig::desk(),
            preprocess: PreprocessConfig::default(),
            noise: NoiseSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses `text`, taking every key it leaves out from [`Default`].
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let given: toml::Table = toml::from_str(text)?;
        let mut merged = toml::Table::try_from(ExperimentConfig::default())?;
        merge(&mut merged, given);
        Ok(merged.try_into()?)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
