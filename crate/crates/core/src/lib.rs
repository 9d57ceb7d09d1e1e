//! Motif-regularized graph neural networks.
//!
//! The crate enumerates 3-node network motifs, trains GCN/GAT encoders for
//! semi-supervised node classification and regularizes them with per-motif
//! noise-contrastive mutual information objectives combined through a
//! multi-motif training curriculum.

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod eval;
pub mod gnn;
pub mod gradcheck;
pub mod graph;
pub mod motif;
pub mod regularizer;
pub mod rng;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
