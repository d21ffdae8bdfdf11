//! Brute-force dense reimplementations, written from the definitions with
//! nested `Vec`s and no shortcuts.

use amgcn::graph::DenseMatrix;

pub type Dense = Vec<Vec<f64>>;

pub fn to_nested(m: &DenseMatrix) -> Dense {
    m.row_iter().map(|r| r.to_vec()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            for t in 0..k {
                out[i][j] += a[i][t] * b[t][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Dense) -> Dense {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

fn identity(n: usize) -> Dense {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn trace(a: &Dense) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

/// `D̃^{-1/2}(A+I)D̃^{-1/2}` with `A` the union-symmetrized edge set minus
/// self-loops.
pub fn normalized_adjacency(n: usize, edges: &[(usize, usize)]) -> Dense {
    let mut a = identity(n);
    for &(i, j) in edges {
        if i != j {
            a[i][j] = 1.0;
            a[j][i] = 1.0;
        }
    }
    let mut d_inv_sqrt = vec![vec![0.0; n]; n];
    for i in 0..n {
        let deg: f64 = a[i].iter().sum();
        d_inv_sqrt[i][i] = 1.0 / deg.sqrt();
    }
    matmul(&matmul(&d_inv_sqrt, &a), &d_inv_sqrt)
}

/// `‖S_a − S_b‖_F²` where `S` holds pairwise cosines of rows (0 for zero rows).
pub fn consistency(za: &DenseMatrix, zb: &DenseMatrix) -> f64 {
    let cosines = |z: &DenseMatrix| -> Dense {
        let rows = to_nested(z);
        let norm = |r: &Vec<f64>| r.iter().map(|v| v * v).sum::<f64>().sqrt();
        rows.iter()
            .map(|ri| {
                rows.iter()
                    .map(|rj| {
                        let (ni, nj) = (norm(ri), norm(rj));
                        if ni == 0.0 || nj == 0.0 {
                            0.0
                        } else {
                            ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>() / (ni * nj)
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let (sa, sb) = (cosines(za), cosines(zb));
    let mut total = 0.0;
    for i in 0..sa.len() {
        for j in 0..sa.len() {
            total += (sa[i][j] - sb[i][j]).powi(2);
        }
    }
    total
}

/// `(n−1)^{−2} tr(R K_a R K_b)` with inner-product kernels and
/// `R = I − eeᵀ/n`.
pub fn hsic(za: &DenseMatrix, zb: &DenseMatrix) -> f64 {
    let (a, b) = (to_nested(za), to_nested(zb));
    let n = a.len();
    let ka = matmul(&a, &transpose(&a));
    let kb = matmul(&b, &transpose(&b));
    let r: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64)
                .collect()
        })
        .collect();
    let prod = matmul(&matmul(&matmul(&r, &ka), &r), &kb);
    trace(&prod) / ((n - 1) as f64).powi(2)
}

/// Summed cross-entropy from logits through log-sum-exp and one-hot targets.
pub fn cross_entropy_from_logits(logits: &DenseMatrix, labels: &[usize], idx: &[usize]) -> f64 {
    let mut loss = 0.0;
    for &i in idx {
        let row = logits.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for (c, &l) in row.iter().enumerate() {
            let y = if c == labels[i] { 1.0 } else { 0.0 };
            loss -= y * (l - lse);
        }
    }
    loss
}

/// Neighbour sets from a full sort of each similarity row, self excluded,
/// ties to the lower index, then union-symmetrized.
pub fn knn_neighbours(s: &DenseMatrix, k: usize) -> Vec<Vec<usize>> {
    let n = s.rows();
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| s.get(i, b).partial_cmp(&s.get(i, a)).unwrap().then(a.cmp(&b)));
        for &j in order.iter().take(k) {
            adj[i][j] = true;
            adj[j][i] = true;
        }
    }
    adj.iter()
        .map(|r| r.iter().enumerate().filter(|(_, &e)| e).map(|(j, _)| j).collect())
        .collect()
}

/// Largest absolute entrywise difference.
pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}
