//! Datasets: synthetic case studies, the on-disk directory format and splits.

mod io;
mod split;
mod synthetic;

use std::path::PathBuf;

use thiserror::Error;

use crate::graph::{DenseMatrix, SparseGraph};

pub use io::{load_dataset, load_dataset_with_report, save_dataset, LoadReport};
pub use split::{make_split, make_stratified_split, Split};
pub use synthetic::{generate, generate_case1, generate_case2, SyntheticCase, SyntheticSpec};

/// Loader and split failures. Each variant has a stable [`DataError::code`].
#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{file}:{line}: {detail}")]
    Parse {
        file: String,
        line: usize,
        detail: String,
    },

    #[error("features.csv:{line}: expected {expected} columns, found {found}")]
    RaggedFeatures {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("labels use {classes} classes but class {missing} never occurs")]
    LabelGap { classes: usize, missing: usize },

    #[error("{file}:{line}: node index {index} out of range for {n} nodes")]
    IndexOutOfRange {
        file: String,
        line: usize,
        index: usize,
        n: usize,
    },

    #[error("labels.tsv: {0}")]
    LabelCoverage(String),

    #[error("split: {0}")]
    Split(String),

    #[error("class {class} has {available} nodes, {needed} needed")]
    InsufficientClass {
        class: usize,
        available: usize,
        needed: usize,
    },
}

impl DataError {
    pub fn code(&self) -> &'static str {
        match self {
            DataError::MissingFile(_) => "missing-file",
            DataError::Parse { .. } => "parse",
            DataError::RaggedFeatures { .. } => "ragged-features",
            DataError::LabelGap { .. } => "label-gap",
            DataError::IndexOutOfRange { .. } => "index-out-of-range",
            DataError::LabelCoverage(_) => "label-coverage",
            DataError::Split(_) => "split",
            DataError::InsufficientClass { .. } => "insufficient-class",
        }
    }
}

/// A graph with node features, class labels and a train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub graph: SparseGraph,
    pub x: DenseMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    /// Empty when the dataset came without a split.
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl LabeledDataset {
    pub fn node_count(&self) -> usize {
        self.x.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn has_split(&self) -> bool {
        !self.train_idx.is_empty()
    }

    pub fn set_split(&mut self, split: Split) {
        self.train_idx = split.train;
        self.test_idx = split.test;
    }

    /// Checks the invariants every consumer relies on.
    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.node_count();
        if self.graph.node_count() != n {
            return Err(DataError::Split(format!(
                "graph has {} nodes, features {n}",
                self.graph.node_count()
            )));
        }
        if self.labels.len() != n {
            return Err(DataError::LabelCoverage(format!(
                "{} labels for {n} nodes",
                self.labels.len()
            )));
        }
        let mut seen = vec![false; self.num_classes];
        for &y in &self.labels {
            if y >= self.num_classes {
                return Err(DataError::LabelCoverage(format!(
                    "class {y} exceeds {} classes",
                    self.num_classes
                )));
            }
            seen[y] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(DataError::LabelGap {
                classes: self.num_classes,
                missing,
            });
        }
        Split {
            train: self.train_idx.clone(),
            test: self.test_idx.clone(),
        }
        .validate(n)
    }
}
