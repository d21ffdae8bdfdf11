//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod oracles;
pub mod props;

use amgcn::graph::DenseMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Random undirected edge list, self-loops and duplicates included on purpose.
pub fn random_edges(rng: &mut impl Rng, n: usize, count: usize) -> Vec<(usize, usize)> {
    (0..count)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect()
}
