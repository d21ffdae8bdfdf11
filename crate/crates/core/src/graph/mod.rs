//! Graph containers, dense matrices, feature similarity and kNN graphs.

mod dense;
mod knn;
mod sparse;

pub(crate) use dense::dot;
pub use dense::DenseMatrix;
pub use knn::{
    build_knn_graph, cosine_similarity, heat_kernel_similarity, knn_from_similarity, SimilarityMetric,
    DEFAULT_HEAT_T,
};
pub use sparse::{normalize_adjacency, spmm, EdgeCleanup, NormalizedAdjacency, SparseGraph};
