//! Undirected graphs in CSR form and the renormalized adjacency used by every
//! convolution layer.

use super::dense::{axpy, par_rows, DenseMatrix};
use crate::error::{dim_mismatch, Error, Result};

/// Symmetric, loop-free, unweighted graph stored as CSR.
///
/// Column indices are sorted and unique within each row, and `(i, j)` is
/// stored exactly when `(j, i)` is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

/// Outcome of building a graph from a raw edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeCleanup {
    pub self_loops_dropped: usize,
    pub duplicates_merged: usize,
}

impl SparseGraph {
    /// Builds an undirected graph from an edge list. Each pair is symmetrized,
    /// duplicates collapse to one edge, and self-loops are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges_counted(n, edges).map(|(g, _)| g)
    }

    /// Same as [`SparseGraph::from_edges`], also reporting what was cleaned up.
    pub fn from_edges_counted(n: usize, edges: &[(usize, usize)]) -> Result<(Self, EdgeCleanup)> {
        let mut cleanup = EdgeCleanup::default();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                cleanup.self_loops_dropped += 1;
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        let mut stored = 0usize;
        for row in &mut adj {
            row.sort_unstable();
            let before = row.len();
            row.dedup();
            stored += before - row.len();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        // Every duplicate undirected edge shows up once in each endpoint's row.
        cleanup.duplicates_merged = stored / 2;
        Ok((Self { n, row_ptr, col_idx }, cleanup))
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.col_idx.len() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.row_ptr.len() != self.n + 1 || self.row_ptr[self.n] != self.col_idx.len() {
            return Err(Error::InvalidInput("malformed CSR row pointer".into()));
        }
        for i in 0..self.n {
            let nb = self.neighbors(i);
            if nb.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!("row {i} is not strictly sorted")));
            }
            for &j in nb {
                if j >= self.n || j == i || !self.has_edge(j, i) {
                    return Err(Error::InvalidInput(format!("bad entry ({i}, {j})")));
                }
            }
        }
        Ok(())
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` with `D̃` the degree matrix of `A + I`.
///
/// Stored as CSR including the diagonal; entry `(i, j)` is
/// `1 / sqrt((deg_i + 1)(deg_j + 1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Symmetric renormalization of a graph with self-loops added.
pub fn normalize_adjacency(graph: &SparseGraph) -> NormalizedAdjacency {
    let n = graph.node_count();
    let deg: Vec<f64> = (0..n).map(|i| (graph.degree(i) + 1) as f64).collect();
    // One square root per entry keeps `1/2`, `1/3`, ... exact.
    let weight = |i: usize, j: usize| 1.0 / (deg[i] * deg[j]).sqrt();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(graph.col_idx.len() + n);
    let mut values = Vec::with_capacity(graph.col_idx.len() + n);
    row_ptr.push(0);
    for i in 0..n {
        let mut diag_done = false;
        for &j in graph.neighbors(i) {
            if !diag_done && j > i {
                col_idx.push(i);
                values.push(weight(i, i));
                diag_done = true;
            }
            col_idx.push(j);
            values.push(weight(i, j));
        }
        if !diag_done {
            col_idx.push(i);
            values.push(weight(i, i));
        }
        row_ptr.push(col_idx.len());
    }
    NormalizedAdjacency {
        n,
        row_ptr,
        col_idx,
        values,
    }
}

impl NormalizedAdjacency {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// `(column, value)` pairs of row `i`, in ascending column order.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m.set(i, j, v);
            }
        }
        m
    }
}

/// Sparse–dense product `N · H`.
///
/// Each output row sums its terms in ascending column order, so results are
/// reproducible bit for bit.
pub fn spmm(adj: &NormalizedAdjacency, h: &DenseMatrix) -> Result<DenseMatrix> {
    if h.rows() != adj.n {
        return Err(dim_mismatch(
            "spmm",
            format!("{n}x{n} adjacency · {}x{} matrix", h.rows(), h.cols(), n = adj.n),
        ));
    }
    let cols = h.cols();
    let mut out = DenseMatrix::zeros(adj.n, cols);
    par_rows(out.data_mut(), cols, adj.nnz() * cols, |i, out_row| {
        for (j, v) in adj.row(i) {
            axpy(v, h.row(j), out_row);
        }
    });
    Ok(out)
}
