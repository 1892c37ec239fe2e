//! Skeleton action recognition with graph convolutions over pluggable
//! joint adjacency matrices.
//!
//! The crate is self-contained: a small reverse-mode autodiff engine
//! ([`tape`]), adjacency construction and normalization ([`graph`]),
//! skeleton data handling ([`data`]), the three-layer validation network
//! ([`model`]), its training loop ([`train`]) and post-hoc inspection of
//! learned matrices and predictions ([`analysis`]).

pub mod analysis;
pub mod data;
pub mod error;
pub mod graph;
pub mod model;
pub mod noise;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
