use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The three corruption models applied to skeleton data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Spurious links added to the joint topology.
    WrongEdges,
    /// Joint identities permuted among a random subset.
    #[serde(rename = "shuffle")]
    ShuffleJoints,
    /// Joints zeroed out in every frame.
    #[serde(rename = "drop")]
    DropJoints,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::WrongEdges, NoiseKind::ShuffleJoints, NoiseKind::DropJoints];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::WrongEdges => "wrong-edges",
            NoiseKind::ShuffleJoints => "shuffle",
            NoiseKind::DropJoints => "drop",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wrong-edges" => Ok(NoiseKind::WrongEdges),
            "shuffle" | "shuffle-joints" => Ok(NoiseKind::ShuffleJoints),
            "drop" | "drop-joints" => Ok(NoiseKind::DropJoints),
            other => Err(format!(
                "unknown noise kind `{}` (expected wrong-edges, shuffle or drop)",
                other
            )),
        }
    }
}

/// One noise injection: what kind, how many edges or joints, and the seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub count: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, count: usize, seed: u64) -> Self {
        NoiseSpec { kind, count, seed }
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// Same kind and count with a seed derived from `(self.seed, salt)`.
    pub fn derive(&self, salt: u64) -> NoiseSpec {
        NoiseSpec {
            seed: mix_seed(self.seed, salt),
            ..*self
        }
    }
}

/// SplitMix64 finalizer over a seed and a salt; used to derive independent
/// per-sample and per-epoch seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
