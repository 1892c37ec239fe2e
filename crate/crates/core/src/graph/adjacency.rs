use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::JointGraphTopology;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Which adjacency a graph convolution layer uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjacencyVariant {
    /// `I` plus the bone neighbor matrix.
    Skeleton,
    Identity,
    /// Bone neighbor matrix only, no self-loops.
    SkNeighbor,
    /// `I` plus a freely learned residual.
    #[serde(rename = "identity+res")]
    IdentityPlusResidual,
    /// Skeleton plus a freely learned residual.
    #[serde(rename = "skeleton+res")]
    SkeletonPlusResidual,
    /// Block matrix over a window of frames; produced by
    /// [`build_st_block_adjacency`], never selected for a layer directly.
    #[serde(rename = "st-block")]
    SpatialTemporalBlock,
}

impl AdjacencyVariant {
    /// The five per-layer choices.
    pub const LAYER_VARIANTS: [AdjacencyVariant; 5] = [
        AdjacencyVariant::Skeleton,
        AdjacencyVariant::Identity,
        AdjacencyVariant::SkNeighbor,
        AdjacencyVariant::IdentityPlusResidual,
        AdjacencyVariant::SkeletonPlusResidual,
    ];

    pub fn has_residual(self) -> bool {
        matches!(
            self,
            AdjacencyVariant::IdentityPlusResidual | AdjacencyVariant::SkeletonPlusResidual
        )
    }

    /// Whether the fixed part depends on the bone list.
    pub fn reads_edges(self) -> bool {
        matches!(
            self,
            AdjacencyVariant::Skeleton | AdjacencyVariant::SkNeighbor | AdjacencyVariant::SkeletonPlusResidual
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AdjacencyVariant::Skeleton => "skeleton",
            AdjacencyVariant::Identity => "identity",
            AdjacencyVariant::SkNeighbor => "sk-neighbor",
            AdjacencyVariant::IdentityPlusResidual => "identity+res",
            AdjacencyVariant::SkeletonPlusResidual => "skeleton+res",
            AdjacencyVariant::SpatialTemporalBlock => "st-block",
        }
    }
}

impl fmt::Display for AdjacencyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AdjacencyVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::LAYER_VARIANTS
            .iter()
            .copied()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                format!(
                    "unknown adjacency `{}` (expected skeleton, identity, sk-neighbor, identity+res or skeleton+res)",
                    s
                )
            })
    }
}

/// Degree normalization scheme; degrees are `Σ_j |a_ij|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `D^{-1/2} A D^{-1/2}`
    #[default]
    Symmetric,
    /// `D^{-1} A`
    RowStochastic,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Symmetric => "symmetric",
            Normalization::RowStochastic => "row-stochastic",
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "symmetric" => Ok(Normalization::Symmetric),
            "row-stochastic" => Ok(Normalization::RowStochastic),
            other => Err(format!("unknown normalization `{}`", other)),
        }
    }
}

/// Which frame pairs of a window receive the temporal block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalLinks {
    #[default]
    AllPairs,
    /// Only frames `i` and `i ± 1`.
    Adjacent,
}

impl fmt::Display for TemporalLinks {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemporalLinks::AllPairs => "all-pairs",
            TemporalLinks::Adjacent => "adjacent",
        })
    }
}

impl FromStr for TemporalLinks {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "all-pairs" => Ok(TemporalLinks::AllPairs),
            "adjacent" => Ok(TemporalLinks::Adjacent),
            other => Err(format!("unknown temporal links `{}`", other)),
        }
    }
}

impl TemporalLinks {
    /// Row-major `τ×τ` mask of linked off-diagonal blocks.
    pub fn mask(self, tau: usize) -> Vec<bool> {
        (0..tau * tau)
            .map(|idx| {
                let (i, j) = (idx / tau, idx % tau);
                match self {
                    TemporalLinks::AllPairs => i != j,
                    TemporalLinks::Adjacent => i.abs_diff(j) == 1,
                }
            })
            .collect()
    }
}

/// A square adjacency matrix with its variant tag.
///
/// For residual variants the value is always `fixed + residual`; the two
/// parts are kept separately so the residual can be trained.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    variant: AdjacencyVariant,
    fixed: Tensor,
    residual: Option<Tensor>,
    normalized: bool,
}

impl AdjacencyMatrix {
    pub fn variant(&self) -> AdjacencyVariant {
        self.variant
    }

    pub fn size(&self) -> usize {
        self.fixed.shape()[0]
    }

    pub fn fixed(&self) -> &Tensor {
        &self.fixed
    }

    pub fn residual(&self) -> Option<&Tensor> {
        self.residual.as_ref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Effective matrix: fixed part plus residual, if any.
    pub fn values(&self) -> Tensor {
        match &self.residual {
            None => self.fixed.clone(),
            Some(r) => {
                let data = self.fixed.data().iter().zip(r.data()).map(|(a, b)| a + b).collect();
                Tensor::new(self.fixed.shape().to_vec(), data).expect("same shape")
            }
        }
    }

    pub fn set_residual(&mut self, residual: Tensor) -> Result<()> {
        if self.residual.is_none() {
            return Err(Error::contract(format!("{} adjacency has no residual", self.variant)));
        }
        if residual.shape() != self.fixed.shape() {
            return Err(Error::dim(
                "set_residual",
                format!("residual {:?} for adjacency {:?}", residual.shape(), self.fixed.shape()),
            ));
        }
        self.residual = Some(residual);
        Ok(())
    }
}

/// Binary bone matrix: 1 at `(i, j)` and `(j, i)` for every edge.
pub fn neighbor_matrix(topology: &JointGraphTopology) -> Tensor {
    let n = topology.n_joints();
    let mut t = Tensor::zeros(&[n, n]);
    for &(i, j) in topology.edges() {
        t.set(&[i, j], 1.0);
        t.set(&[j, i], 1.0);
    }
    t
}

/// Fixed (non-learned) part of a layer variant.
pub fn fixed_part(topology: &JointGraphTopology, variant: AdjacencyVariant) -> Result<Tensor> {
    let n = topology.n_joints();
    let mut t = match variant {
        AdjacencyVariant::Identity | AdjacencyVariant::IdentityPlusResidual => return Ok(Tensor::identity(n)),
        AdjacencyVariant::SkNeighbor | AdjacencyVariant::Skeleton | AdjacencyVariant::SkeletonPlusResidual => {
            neighbor_matrix(topology)
        }
        AdjacencyVariant::SpatialTemporalBlock => {
            return Err(Error::contract("the block variant is built by build_st_block_adjacency"))
        }
    };
    if variant != AdjacencyVariant::SkNeighbor {
        for i in 0..n {
            t.set(&[i, i], 1.0);
        }
    }
    Ok(t)
}

/// Builds one of the five layer variants. Residual variants take
/// `residual_init` (zeros when absent); other variants must not get one.
pub fn build_adjacency(
    topology: &JointGraphTopology,
    variant: AdjacencyVariant,
    residual_init: Option<Tensor>,
) -> Result<AdjacencyMatrix> {
    let fixed = fixed_part(topology, variant)?;
    let n = topology.n_joints();
    let residual = match (variant.has_residual(), residual_init) {
        (false, Some(_)) => {
            return Err(Error::contract(format!("{} adjacency takes no residual", variant)));
        }
        (false, None) => None,
        (true, None) => Some(Tensor::zeros(&[n, n])),
        (true, Some(r)) if r.shape() == [n, n] => Some(r),
        (true, Some(r)) => {
            return Err(Error::dim(
                "build_adjacency",
                format!("residual shape {:?}, expected [{}, {}]", r.shape(), n, n),
            ));
        }
    };
    Ok(AdjacencyMatrix {
        variant,
        fixed,
        residual,
        normalized: false,
    })
}

/// Residual initialization: i.i.d. uniform in `[-scale, scale]`.
pub fn init_residual(n: usize, scale: f64, rng: &mut impl Rng) -> Tensor {
    let data = (0..n * n).map(|_| rng.random_range(-scale..=scale)).collect();
    Tensor::new(vec![n, n], data).expect("n*n values")
}

/// Degree-normalized matrix of the effective values. Zero-degree rows
/// (and the matching columns under symmetric normalization) stay zero.
pub fn normalize(adjacency: &AdjacencyMatrix, mode: Normalization) -> AdjacencyMatrix {
    let n = adjacency.size();
    let data = normalize_values(adjacency.values().data(), n, mode);
    AdjacencyMatrix {
        variant: adjacency.variant,
        fixed: Tensor::new(vec![n, n], data).expect("n*n values"),
        residual: None,
        normalized: true,
    }
}

pub(crate) fn normalize_values(a: &[f64], n: usize, mode: Normalization) -> Vec<f64> {
    let deg: Vec<f64> = (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum())
        .collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        if deg[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            out[i * n + j] = match mode {
                Normalization::Symmetric if deg[j] == 0.0 => 0.0,
                Normalization::Symmetric => a[i * n + j] / (deg[i] * deg[j]).sqrt(),
                Normalization::RowStochastic => a[i * n + j] / deg[i],
            };
        }
    }
    out
}

/// Spatial-temporal block adjacency over a window of `tau` frames, linking
/// every frame pair.
pub fn build_st_block_adjacency(
    spatial: &AdjacencyMatrix,
    temporal: &AdjacencyMatrix,
    tau: usize,
) -> Result<AdjacencyMatrix> {
    build_st_block_adjacency_with(spatial, temporal, tau, TemporalLinks::AllPairs)
}

pub fn build_st_block_adjacency_with(
    spatial: &AdjacencyMatrix,
    temporal: &AdjacencyMatrix,
    tau: usize,
    links: TemporalLinks,
) -> Result<AdjacencyMatrix> {
    if tau < 1 {
        return Err(Error::contract("tau must be at least 1"));
    }
    let m = spatial.size();
    if temporal.size() != m {
        return Err(Error::dim(
            "build_st_block_adjacency",
            format!("spatial {}x{} against temporal {}x{}", m, m, temporal.size(), temporal.size()),
        ));
    }
    if tau == 1 {
        return Ok(spatial.clone());
    }
    let data = tile_blocks(spatial.values().data(), temporal.values().data(), m, tau, &links.mask(tau));
    Ok(AdjacencyMatrix {
        variant: AdjacencyVariant::SpatialTemporalBlock,
        fixed: Tensor::new(vec![m * tau, m * tau], data)?,
        residual: None,
        normalized: false,
    })
}

pub(crate) fn tile_blocks(spatial: &[f64], temporal: &[f64], m: usize, tau: usize, links: &[bool]) -> Vec<f64> {
    let size = m * tau;
    let mut out = vec![0.0; size * size];
    for bi in 0..tau {
        for bj in 0..tau {
            let block = if bi == bj {
                spatial
            } else if links[bi * tau + bj] {
                temporal
            } else {
                continue;
            };
            for r in 0..m {
                let dst = (bi * m + r) * size + bj * m;
                out[dst..dst + m].copy_from_slice(&block[r * m..(r + 1) * m]);
            }
        }
    }
    out
}

/// One entry of a matrix, as an edge `row -> col`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedEdge {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// The `k` entries of largest magnitude, ties broken by `(row, col)`.
/// Diagonal entries compete like any other.
pub fn top_k_edges(matrix: &Tensor, k: usize) -> Result<Vec<WeightedEdge>> {
    let (rows, cols) = matrix.as_matrix("top_k_edges")?;
    if k > rows * cols {
        return Err(Error::contract(format!(
            "k = {} exceeds the {} entries of a {}x{} matrix",
            k,
            rows * cols,
            rows,
            cols
        )));
    }
    let mut edges: Vec<WeightedEdge> = matrix
        .data()
        .iter()
        .enumerate()
        .map(|(idx, &value)| WeightedEdge {
            row: idx / cols,
            col: idx % cols,
            value,
        })
        .collect();
    edges.sort_by(|a, b| {
        b.value
            .abs()
            .total_cmp(&a.value.abs())
            .then((a.row, a.col).cmp(&(b.row, b.col)))
    });
    edges.truncate(k);
    Ok(edges)
}
