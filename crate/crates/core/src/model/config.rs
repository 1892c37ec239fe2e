use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AdjacencyVariant, Normalization, TemporalLinks};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    #[default]
    Relu,
    /// No nonlinearity; used to check the linear algebra in isolation.
    Identity,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(format!("unknown activation `{}`", other)),
        }
    }
}

/// Shape and wiring of the three-layer validation network.
///
/// Pipeline: GCN1 → temporal conv → pool → GCN2 → temporal conv → pool →
/// GCN3 → mean over frames and joints → fully connected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_joints: usize,
    pub in_channels: usize,
    pub class_count: usize,
    pub gcn_channels: [usize; 3],
    pub adjacency: [AdjacencyVariant; 3],
    /// Frames per spatial-temporal window; 1 is plain spatial convolution.
    pub tau: usize,
    /// Fixed off-diagonal block used when `tau > 1`.
    pub temporal_adjacency: AdjacencyVariant,
    pub temporal_links: TemporalLinks,
    pub temporal_kernel: usize,
    /// Average-pooling stride along time after each temporal conv.
    pub temporal_pool: usize,
    pub activation: Activation,
    pub normalization: Normalization,
    /// Half-width of the uniform residual initialization.
    pub residual_init_scale: f64,
}

impl ModelConfig {
    /// Defaults for everything except the data-dependent sizes.
    pub fn new(n_joints: usize, in_channels: usize, class_count: usize) -> Self {
        ModelConfig {
            n_joints,
            in_channels,
            class_count,
            gcn_channels: [64, 64, 128],
            adjacency: [AdjacencyVariant::IdentityPlusResidual; 3],
            tau: 1,
            temporal_adjacency: AdjacencyVariant::Identity,
            temporal_links: TemporalLinks::AllPairs,
            temporal_kernel: 5,
            temporal_pool: 2,
            activation: Activation::Relu,
            normalization: Normalization::Symmetric,
            residual_init_scale: 1e-4,
        }
    }

    pub fn with_adjacency(mut self, variant: AdjacencyVariant) -> Self {
        self.adjacency = [variant; 3];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_joints == 0 || self.in_channels == 0 {
            return Err(Error::contract("n_joints and in_channels must be positive"));
        }
        if self.class_count < 2 {
            return Err(Error::contract("class_count must be at least 2"));
        }
        if self.gcn_channels.contains(&0) {
            return Err(Error::contract("GCN widths must be positive"));
        }
        if let Some(v) = self.adjacency.iter().find(|v| **v == AdjacencyVariant::SpatialTemporalBlock) {
            return Err(Error::contract(format!("{} is not a per-layer adjacency", v)));
        }
        if self.tau == 0 {
            return Err(Error::contract("tau must be at least 1"));
        }
        if self.temporal_adjacency.has_residual() || self.temporal_adjacency == AdjacencyVariant::SpatialTemporalBlock {
            return Err(Error::contract("the temporal block must be a fixed variant"));
        }
        if self.temporal_kernel.is_multiple_of(2) {
            return Err(Error::contract("temporal_kernel must be odd"));
        }
        if self.temporal_pool == 0 {
            return Err(Error::contract("temporal_pool must be at least 1"));
        }
        if !(self.residual_init_scale.is_finite() && self.residual_init_scale >= 0.0) {
            return Err(Error::contract("residual_init_scale must be finite and non-negative"));
        }
        Ok(())
    }

    /// Input width of GCN layer `layer` (0-based).
    pub fn gcn_in(&self, layer: usize) -> usize {
        if layer == 0 {
            self.in_channels
        } else {
            self.gcn_channels[layer - 1]
        }
    }

    /// Names and shapes of every trainable tensor, in canonical order.
    pub fn parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for layer in 0..3 {
            out.push((format!("gcn{}.weight", layer + 1), vec![self.gcn_in(layer), self.gcn_channels[layer]]));
            if self.adjacency[layer].has_residual() {
                out.push((format!("gcn{}.residual", layer + 1), vec![self.n_joints, self.n_joints]));
            }
            if layer < 2 {
                let c = self.gcn_channels[layer];
                out.push((format!("tcn{}.weight", layer + 1), vec![self.temporal_kernel, c, c]));
                out.push((format!("tcn{}.bias", layer + 1), vec![c]));
            }
        }
        out.push(("fc.weight".to_string(), vec![self.gcn_channels[2], self.class_count]));
        out.push(("fc.bias".to_string(), vec![self.class_count]));
        out
    }
}
