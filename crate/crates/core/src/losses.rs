//! Training objective: cross-entropy, consistency and HSIC disparity terms.
//!
//! The two constraint terms are defined through `n × n` Gram matrices but are
//! evaluated through `h × h` products instead:
//!
//! ```text
//! ‖A Aᵀ − B Bᵀ‖²_F  = ‖AᵀA‖²_F − 2‖AᵀB‖²_F + ‖BᵀB‖²_F
//! tr(R Ka R Kb)     = ‖(R A)ᵀ (R B)‖²_F          (Ka = A Aᵀ, Kb = B Bᵀ)
//! ```
//!
//! which keeps memory linear in the node count.

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};
use crate::graph::{dot, DenseMatrix};

/// Floor applied before taking the log of a probability.
pub const LOG_CLAMP: f64 = 1e-12;

/// `−Σ_{l ∈ train} ln p[l, y_l]`, summed over the training nodes.
pub fn cross_entropy(probs: &DenseMatrix, labels: &[usize], train_idx: &[usize]) -> Result<f64> {
    if train_idx.is_empty() {
        return Err(Error::InvalidInput(
            "cross-entropy over an empty training set".into(),
        ));
    }
    let classes = probs.cols();
    let mut loss = 0.0;
    for &i in train_idx {
        let y = *labels
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("training index {i} has no label")))?;
        if y >= classes || i >= probs.rows() {
            return Err(Error::InvalidInput(format!(
                "label {y} of node {i} is out of range for {classes} classes"
            )));
        }
        loss -= probs.get(i, y).max(LOG_CLAMP).ln();
    }
    Ok(loss)
}

/// Row-wise L2 normalization; zero rows stay zero. Also returns the norms.
pub fn normalize_rows(z: &DenseMatrix) -> (DenseMatrix, Vec<f64>) {
    let mut out = z.clone();
    let mut norms = Vec::with_capacity(z.rows());
    for i in 0..z.rows() {
        let row = out.row_mut(i);
        let norm = dot(row, row).sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
        norms.push(norm);
    }
    (out, norms)
}

/// Pulls a gradient w.r.t. normalized rows back to the raw rows.
pub(crate) fn normalize_rows_backward(
    normalized: &DenseMatrix,
    norms: &[f64],
    grad: &DenseMatrix,
) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(grad.rows(), grad.cols());
    for (i, &r) in norms.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        let a = normalized.row(i);
        let g = grad.row(i);
        let proj = dot(a, g);
        for ((o, &gv), &av) in out.row_mut(i).iter_mut().zip(g).zip(a) {
            *o = (gv - av * proj) / r;
        }
    }
    out
}

fn check_rows(op: &'static str, a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.rows() != b.rows() {
        return Err(dim_mismatch(
            op,
            format!("{} rows vs {} rows", a.rows(), b.rows()),
        ));
    }
    Ok(())
}

/// `‖S_T − S_F‖²_F` with `S = Z̄ Z̄ᵀ` the cosine-similarity matrix of the
/// row-normalized embeddings.
pub fn consistency_loss(z_ct: &DenseMatrix, z_cf: &DenseMatrix) -> Result<f64> {
    check_rows("consistency_loss", z_ct, z_cf)?;
    let (a, _) = normalize_rows(z_ct);
    let (b, _) = normalize_rows(z_cf);
    let aa = a.matmul_tn(&a)?;
    let ab = a.matmul_tn(&b)?;
    let bb = b.matmul_tn(&b)?;
    Ok((aa.frobenius_sq() - 2.0 * ab.frobenius_sq() + bb.frobenius_sq()).max(0.0))
}

/// Consistency loss and its gradients w.r.t. `z_ct` and `z_cf`.
pub fn consistency_loss_grad(
    z_ct: &DenseMatrix,
    z_cf: &DenseMatrix,
) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    check_rows("consistency_loss", z_ct, z_cf)?;
    let (a, na) = normalize_rows(z_ct);
    let (b, nb) = normalize_rows(z_cf);
    let aa = a.matmul_tn(&a)?;
    let ab = a.matmul_tn(&b)?;
    let bb = b.matmul_tn(&b)?;
    let loss = (aa.frobenius_sq() - 2.0 * ab.frobenius_sq() + bb.frobenius_sq()).max(0.0);

    // dL/dA = 4 (A AᵀA − B BᵀA),  dL/dB = 4 (B BᵀB − A AᵀB)
    let mut ga = a.matmul(&aa)?;
    ga.add_scaled(-1.0, &b.matmul(&ab.transpose())?)?;
    ga.scale(4.0);
    let mut gb = b.matmul(&bb)?;
    gb.add_scaled(-1.0, &a.matmul(&ab)?)?;
    gb.scale(4.0);
    Ok((
        loss,
        normalize_rows_backward(&a, &na, &ga),
        normalize_rows_backward(&b, &nb, &gb),
    ))
}

fn center_columns(z: &DenseMatrix) -> DenseMatrix {
    let means = z.column_means();
    let mut out = z.clone();
    for i in 0..out.rows() {
        for (v, m) in out.row_mut(i).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    out
}

fn hsic_parts(za: &DenseMatrix, zb: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix, f64)> {
    let n = za.rows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "HSIC needs at least 2 rows, got {n}"
        )));
    }
    check_rows("hsic", za, zb)?;
    let ca = center_columns(za);
    let cb = center_columns(zb);
    let cross = ca.matmul_tn(&cb)?;
    let norm = 1.0 / ((n - 1) as f64).powi(2);
    Ok((ca, cb, cross, norm))
}

/// Empirical HSIC with inner-product kernels, `(n−1)^{-2} tr(R Ka R Kb)`.
pub fn hsic(za: &DenseMatrix, zb: &DenseMatrix) -> Result<f64> {
    let (_, _, cross, norm) = hsic_parts(za, zb)?;
    Ok(norm * cross.frobenius_sq())
}

/// HSIC and its gradients w.r.t. both arguments.
pub fn hsic_grad(za: &DenseMatrix, zb: &DenseMatrix) -> Result<(f64, DenseMatrix, DenseMatrix)> {
    let (ca, cb, cross, norm) = hsic_parts(za, zb)?;
    let value = norm * cross.frobenius_sq();
    // Centered columns are already in the range of R, so R drops out.
    let mut ga = cb.matmul_nt(&cross)?;
    ga.scale(2.0 * norm);
    let mut gb = ca.matmul(&cross)?;
    gb.scale(2.0 * norm);
    Ok((value, ga, gb))
}

/// `HSIC(Z_T, Z_CT) + HSIC(Z_F, Z_CF)`.
pub fn disparity_loss(
    z_t: &DenseMatrix,
    z_ct: &DenseMatrix,
    z_f: &DenseMatrix,
    z_cf: &DenseMatrix,
) -> Result<f64> {
    Ok(hsic(z_t, z_ct)? + hsic(z_f, z_cf)?)
}

/// Coefficients of the consistency (`gamma`) and disparity (`beta`) terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gamma: f64,
    pub beta: f64,
}

impl LossWeights {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if !(gamma.is_finite() && beta.is_finite() && gamma >= 0.0 && beta >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "loss weights must be finite and non-negative, got gamma={gamma}, beta={beta}"
            )));
        }
        Ok(Self { gamma, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub task: f64,
    pub consistency: f64,
    pub disparity: f64,
    pub total: f64,
}

/// `L = L_t + γ L_c + β L_d`.
pub fn total_loss(task: f64, consistency: f64, disparity: f64, weights: LossWeights) -> LossBreakdown {
    LossBreakdown {
        task,
        consistency,
        disparity,
        total: task + weights.gamma * consistency + weights.beta * disparity,
    }
}
