//! Cross-network node embedding and classification.
//!
//! Given a labeled source network and an unlabeled target network that
//! share an attribute vocabulary, this crate learns a node embedding in
//! which class structure is preserved and the two networks are hard to
//! tell apart, then classifies the target's nodes. The embedder feeds
//! each node's own attributes and a proximity-weighted average of its
//! neighborhood's attributes through separate feature extractors, and is
//! trained against three signals at once: a supervised classifier on the
//! source, a pairwise penalty that pulls strongly-connected nodes
//! together, and a domain discriminator whose gradient is reversed so
//! the embedder learns to fool it.
//!
//! Entry points:
//! - [`graph::io::load_network`] / [`synth::generate_pair`] to get data,
//! - [`model::train::train`] to fit a model,
//! - [`model::predict::predict`] and [`eval::evaluate_network`] to use it,
//! - [`model::ckpt`] to save and restore checkpoints.

#![deny(unsafe_code)]

pub mod checkpoint;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod nn;
pub mod proximity;
pub mod sparse;
pub mod synth;

pub use error::{CoreError, Result};
pub use eval::{evaluate_network, EvalReport};
pub use graph::{align_attributes, AttributedNetwork, LabelMode, Labels, NetworkPair};
pub use model::train::{train, TrainOutput, TrainedModel};
pub use model::{ModelVariant, TrainConfig};
pub use proximity::{ppmi_matrix, ProximityMatrix};
pub use sparse::SparseRowMatrix;
pub use synth::{generate_pair, SynthSpec};
