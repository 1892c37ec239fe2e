//! Joint topologies and the adjacency matrices built from them.

mod adjacency;
mod topology;

pub use adjacency::{
    build_adjacency, build_st_block_adjacency, build_st_block_adjacency_with, fixed_part, init_residual,
    neighbor_matrix, normalize, top_k_edges, AdjacencyMatrix, AdjacencyVariant, Normalization, TemporalLinks,
    WeightedEdge,
};
pub(crate) use adjacency::{normalize_values, tile_blocks};
pub use topology::{add_wrong_edges, JointGraphTopology};
pub(crate) use topology::{parse_usize, strip_comment};
