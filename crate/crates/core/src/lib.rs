//! Adaptive multi-channel graph convolutional networks.
//!
//! Node features are propagated over two graphs: the given topology graph and
//! a kNN graph built from feature similarity. Each graph gets its own 2-layer
//! GCN, and a third GCN with shared weights runs on both graphs to extract a
//! common embedding. A per-node attention mechanism fuses the three
//! embeddings before a linear softmax classifier.
//!
//! Training minimizes cross-entropy plus a consistency term (the two common
//! branches should induce the same node-similarity structure) and an HSIC
//! disparity term (each specific embedding should be independent of the
//! common embedding from the same graph). Gradients are derived by hand in
//! [`training::backward`] and verified against central differences in
//! [`training::gradcheck`].
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | dense/sparse matrices, similarity, kNN graph, normalization |
//! | [`model`] | parameters and the forward pass |
//! | [`losses`] | cross-entropy, consistency, HSIC |
//! | [`training`] | backward pass, gradient check, Adam, training loop |
//! | [`data`] | synthetic generators, dataset files, splits |
//! | [`eval`] | metrics, attention reports, embedding export, checkpoints |

pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod losses;
pub mod model;
pub mod training;

pub use error::{Error, Result};
pub use graph::{DenseMatrix, NormalizedAdjacency, SimilarityMetric, SparseGraph};
