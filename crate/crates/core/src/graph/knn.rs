//! Feature-space similarity and the kNN feature graph.
//!
//! The full `n × n` similarity matrix is materialized, which costs `8·n²`
//! bytes (about 3.2 GB at 20k nodes).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dense::{dot, par_rows, DenseMatrix};
use super::sparse::SparseGraph;
use crate::error::{Error, Result};

pub const DEFAULT_HEAT_T: f64 = 2.0;

/// Serialized as `cosine` or `heat:<t>`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SimilarityMetric {
    #[default]
    Cosine,
    HeatKernel {
        t: f64,
    },
}

impl SimilarityMetric {
    pub fn heat() -> Self {
        Self::HeatKernel { t: DEFAULT_HEAT_T }
    }

    pub fn similarity(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        match *self {
            Self::Cosine => cosine_similarity(x),
            Self::HeatKernel { t } => heat_kernel_similarity(x, t),
        }
    }
}

impl fmt::Display for SimilarityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cosine => f.write_str("cosine"),
            Self::HeatKernel { t } => write!(f, "heat:{t}"),
        }
    }
}

impl TryFrom<String> for SimilarityMetric {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SimilarityMetric> for String {
    fn from(m: SimilarityMetric) -> String {
        m.to_string()
    }
}

/// Accepts `cosine`, `heat` (t = 2) or `heat:<t>`.
impl FromStr for SimilarityMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "cosine" => Ok(Self::Cosine),
            "heat" => Ok(Self::heat()),
            _ => {
                let t = s
                    .strip_prefix("heat:")
                    .and_then(|t| t.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidInput(format!("unknown similarity metric '{s}'")))?;
                if !(t > 0.0 && t.is_finite()) {
                    return Err(Error::InvalidInput(format!("heat kernel t must be > 0, got {t}")));
                }
                Ok(Self::HeatKernel { t })
            }
        }
    }
}

fn check_finite(x: &DenseMatrix) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(
            "feature matrix has non-finite entries".into(),
        ))
    }
}

/// Pairwise cosine similarity of the rows of `x`. Zero rows are similar to
/// nothing, themselves included.
pub fn cosine_similarity(x: &DenseMatrix) -> Result<DenseMatrix> {
    check_finite(x)?;
    let n = x.rows();
    let norms: Vec<f64> = x.row_iter().map(|r| dot(r, r).sqrt()).collect();
    let mut s = DenseMatrix::zeros(n, n);
    par_rows(s.data_mut(), n, n * n * x.cols(), |i, out| {
        if norms[i] == 0.0 {
            return;
        }
        let xi = x.row(i);
        for (j, o) in out.iter_mut().enumerate() {
            if norms[j] == 0.0 {
                continue;
            }
            *o = if i == j {
                1.0
            } else {
                (dot(xi, x.row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
        }
    });
    Ok(s)
}

/// `exp(-‖x_i − x_j‖² / t)` for every pair of rows.
pub fn heat_kernel_similarity(x: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("heat kernel t must be > 0, got {t}")));
    }
    check_finite(x)?;
    let n = x.rows();
    let mut s = DenseMatrix::zeros(n, n);
    par_rows(s.data_mut(), n, n * n * x.cols(), |i, out| {
        let xi = x.row(i);
        for (j, o) in out.iter_mut().enumerate() {
            let d2: f64 = xi.iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            *o = (-d2 / t).exp();
        }
    });
    Ok(s)
}

/// Connects every node to its `k` most similar other nodes and symmetrizes the
/// result by union. Ties go to the lower node index.
pub fn build_knn_graph(x: &DenseMatrix, k: usize, metric: SimilarityMetric) -> Result<SparseGraph> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "k must satisfy 1 <= k <= n - 1, got k = {k} with n = {n}"
        )));
    }
    let s = metric.similarity(x)?;
    Ok(knn_from_similarity(&s, k))
}

/// Top-`k` selection on a precomputed similarity matrix.
pub fn knn_from_similarity(s: &DenseMatrix, k: usize) -> SparseGraph {
    let n = s.rows();
    let mut edges = Vec::with_capacity(n * k);
    let mut candidates: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        let row = s.row(i);
        candidates.clear();
        candidates.extend((0..n).filter(|&j| j != i));
        let by_similarity = |a: &usize, b: &usize| {
            row[*b]
                .partial_cmp(&row[*a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(b))
        };
        let k = k.min(candidates.len());
        if k < candidates.len() {
            candidates.select_nth_unstable_by(k, by_similarity);
        }
        edges.extend(candidates[..k].iter().map(|&j| (i, j)));
    }
    SparseGraph::from_edges(n, &edges).expect("indices are in range by construction")
}
