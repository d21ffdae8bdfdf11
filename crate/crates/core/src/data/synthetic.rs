//! The two controlled case studies.
//!
//! Case 1 puts the label signal in the features (class Gaussians on a random
//! graph); case 2 puts it in the topology (a 3-block SBM with noise features).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::split::make_stratified_split;
use super::{DataError, LabeledDataset};
use crate::graph::{DenseMatrix, SparseGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticCase {
    /// Random labels, Erdős–Rényi topology, class-conditional Gaussian features.
    GaussianFeatures,
    /// Block labels, SBM topology, standard normal features.
    SbmTopology,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub case: SyntheticCase,
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    /// Edge probability within a class block (the only probability in case 1).
    pub p_intra: f64,
    pub p_inter: f64,
    /// Pairwise distance between the class centers (case 1).
    pub center_separation: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn case1(seed: u64) -> Self {
        Self {
            case: SyntheticCase::GaussianFeatures,
            nodes: 900,
            features: 50,
            classes: 3,
            p_intra: 0.03,
            p_inter: 0.03,
            center_separation: 10.0,
            train_per_class: 20,
            test_per_class: 200,
            seed,
        }
    }

    pub fn case2(seed: u64) -> Self {
        Self {
            case: SyntheticCase::SbmTopology,
            p_inter: 0.0015,
            center_separation: 0.0,
            ..Self::case1(seed)
        }
    }

    fn validate(&self) -> Result<(), DataError> {
        let bad = |detail: String| DataError::Split(format!("synthetic spec: {detail}"));
        for p in [self.p_intra, self.p_inter] {
            if !(0.0..=1.0).contains(&p) {
                return Err(bad(format!("probability {p} outside [0, 1]")));
            }
        }
        if self.classes == 0 || !self.nodes.is_multiple_of(self.classes) {
            return Err(bad(format!(
                "{} nodes do not divide into {} classes",
                self.nodes, self.classes
            )));
        }
        if self.case == SyntheticCase::GaussianFeatures && self.features < self.classes {
            return Err(bad("need at least one feature per class".into()));
        }
        Ok(())
    }
}

/// Class centers: scaled standard basis vectors `e_0 … e_{C−1}`, shifted to
/// have zero mean, so every pair is exactly `separation` apart.
fn simplex_centers(classes: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let s = separation / std::f64::consts::SQRT_2;
    let shift = s / classes as f64;
    (0..classes)
        .map(|k| {
            (0..dim)
                .map(|j| {
                    let on = if j == k { s } else { 0.0 };
                    if j < classes {
                        on - shift
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

pub fn generate(spec: &SyntheticSpec) -> Result<LabeledDataset, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, c) = (spec.nodes, spec.classes);
    let block = n / c;
    let blocks: Vec<usize> = (0..n).map(|i| i / block).collect();

    let labels = match spec.case {
        SyntheticCase::GaussianFeatures => {
            let mut l = blocks.clone();
            l.shuffle(&mut rng);
            l
        }
        SyntheticCase::SbmTopology => blocks.clone(),
    };

    // Per-pair Bernoulli draws in (i < j) order.
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if blocks[i] == blocks[j] {
                spec.p_intra
            } else {
                spec.p_inter
            };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = SparseGraph::from_edges(n, &edges).expect("generated indices are in range");

    let centers = match spec.case {
        SyntheticCase::GaussianFeatures => simplex_centers(c, spec.features, spec.center_separation),
        SyntheticCase::SbmTopology => vec![vec![0.0; spec.features]; c],
    };
    let x = DenseMatrix::from_fn(n, spec.features, |i, j| {
        centers[labels[i]][j] + rng.sample::<f64, _>(StandardNormal)
    });

    let split = make_stratified_split(
        &labels,
        c,
        spec.train_per_class,
        spec.test_per_class,
        spec.seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
    )?;
    Ok(LabeledDataset {
        graph,
        x,
        labels,
        num_classes: c,
        train_idx: split.train,
        test_idx: split.test,
    })
}

pub fn generate_case1(seed: u64) -> LabeledDataset {
    generate(&SyntheticSpec::case1(seed)).expect("case 1 spec is valid")
}

pub fn generate_case2(seed: u64) -> LabeledDataset {
    generate(&SyntheticSpec::case2(seed)).expect("case 2 spec is valid")
}
