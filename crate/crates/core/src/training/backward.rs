//! Reverse-mode gradients of the full objective.
//!
//! The pass walks the forward graph backwards: softmax cross-entropy into the
//! classifier, through attention fusion into the three embeddings, adds the
//! constraint gradients on `Z_T, Z_CT, Z_CF, Z_F`, then back through each
//! 2-layer branch. The common channel receives the sum of its two branches.

use crate::error::{Error, Result};
use crate::graph::{spmm, DenseMatrix, NormalizedAdjacency};
use crate::losses::{
    consistency_loss, consistency_loss_grad, cross_entropy, hsic, hsic_grad, total_loss, LossBreakdown,
    LossWeights,
};
use crate::model::{
    AttentionParams, Channel, ChannelTrace, ForwardState, GcnChannelParams, Gradients, ModelInputs,
    ModelParams,
};

/// Supervision and weighting of the objective.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub labels: &'a [usize],
    pub train_idx: &'a [usize],
    pub weights: LossWeights,
    /// Divide the cross-entropy by the number of training nodes.
    pub ce_mean: bool,
}

impl Objective<'_> {
    fn ce_scale(&self) -> f64 {
        if self.ce_mean {
            1.0 / self.train_idx.len() as f64
        } else {
            1.0
        }
    }
}

/// Evaluates every loss term on a forward state.
///
/// Terms involving a channel that is masked out of fusion are reported as 0:
/// the consistency term needs the common channel, each HSIC term needs its
/// specific channel and the common channel.
pub fn loss_breakdown(state: &ForwardState, objective: &Objective<'_>) -> Result<LossBreakdown> {
    let active = state.options.active;
    let task = objective.ce_scale() * cross_entropy(&state.probs, objective.labels, objective.train_idx)?;
    let common = active.contains(Channel::Common);
    let consistency = if common {
        consistency_loss(state.z_ct(), state.z_cf())?
    } else {
        0.0
    };
    let mut disparity = 0.0;
    if common && active.contains(Channel::Topology) {
        disparity += hsic(state.z_t(), state.z_ct())?;
    }
    if common && active.contains(Channel::Feature) {
        disparity += hsic(state.z_f(), state.z_cf())?;
    }
    Ok(total_loss(task, consistency, disparity, objective.weights))
}

/// Gradient of `dL/dlogits` for the (summed or averaged) softmax cross-entropy.
fn logits_grad(state: &ForwardState, objective: &Objective<'_>) -> Result<DenseMatrix> {
    let mut g = DenseMatrix::zeros(state.probs.rows(), state.probs.cols());
    let scale = objective.ce_scale();
    for &i in objective.train_idx {
        let y = objective.labels[i];
        if y >= g.cols() {
            return Err(Error::InvalidInput(format!("label {y} of node {i} out of range")));
        }
        let row = g.row_mut(i);
        row.copy_from_slice(state.probs.row(i));
        row[y] -= 1.0;
        row.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(g)
}

fn relu_mask(grad: &DenseMatrix, pre: &DenseMatrix) -> DenseMatrix {
    grad.zip_map(pre, |g, p| if p > 0.0 { g } else { 0.0 })
        .expect("gradient and pre-activation share a shape")
}

/// Gradients of one 2-layer branch given `dL/dZ` of its output.
pub fn channel_backward(
    adj: &NormalizedAdjacency,
    x: &DenseMatrix,
    trace: &ChannelTrace,
    params: &GcnChannelParams,
    dz: &DenseMatrix,
) -> Result<GcnChannelParams> {
    let d_pre2 = relu_mask(dz, &trace.pre2);
    let d_agg2 = spmm(adj, &d_pre2)?;
    let w2 = trace.hidden.matmul_tn(&d_agg2)?;
    let mut d_hidden = d_agg2.matmul_nt(&params.w2)?;
    if let Some(mask) = &trace.hidden_mask {
        d_hidden = mask.apply(&d_hidden);
    }
    let d_pre1 = relu_mask(&d_hidden, &trace.pre1);
    let d_agg1 = spmm(adj, &d_pre1)?;
    let w1 = match &trace.input_mask {
        Some(mask) => mask.apply(x).matmul_tn(&d_agg1)?,
        None => x.matmul_tn(&d_agg1)?,
    };
    Ok(GcnChannelParams { w1, w2 })
}

/// Backpropagates `dL/dZ` through attention fusion.
///
/// Returns `dL/dZ_e` for the three embeddings (zero for masked channels) and
/// accumulates the attention parameter gradients into `grads`.
fn attention_backward(
    state: &ForwardState,
    attn: &AttentionParams,
    dz: &DenseMatrix,
    grads: &mut AttentionParams,
) -> Result<[DenseMatrix; 3]> {
    let (n, h) = dz.shape();
    let alpha = &state.attention.alpha;
    let active: Vec<Channel> = state.options.active.iter().collect();
    let mut d_emb = [
        DenseMatrix::zeros(n, h),
        DenseMatrix::zeros(n, h),
        DenseMatrix::zeros(n, h),
    ];

    // Direct path Z = Σ α_e Z_e, and dL/dα.
    let mut d_alpha = DenseMatrix::zeros(n, 3);
    for &c in &active {
        let e = c.index();
        let z_e = state.embedding(c);
        for i in 0..n {
            let a = alpha.get(i, e);
            let g = dz.row(i);
            d_alpha.set(i, e, crate::graph::dot(g, z_e.row(i)));
            for (o, gv) in d_emb[e].row_mut(i).iter_mut().zip(g) {
                *o = a * gv;
            }
        }
    }

    // Softmax: dω_e = α_e (dα_e − Σ_k α_k dα_k).
    let mut d_score = DenseMatrix::zeros(n, 3);
    for i in 0..n {
        let s: f64 = active
            .iter()
            .map(|c| alpha.get(i, c.index()) * d_alpha.get(i, c.index()))
            .sum();
        for c in &active {
            let e = c.index();
            d_score.set(i, e, alpha.get(i, e) * (d_alpha.get(i, e) - s));
        }
    }

    // ω_e = q · tanh(W z_e + b).
    let q = attn.q.data().to_vec();
    for &c in &active {
        let e = c.index();
        let u = state.attention.hidden[e]
            .as_ref()
            .ok_or(Error::MissingCache("attention hidden"))?;
        let mut d_pre = DenseMatrix::zeros(n, q.len());
        for i in 0..n {
            let ds = d_score.get(i, e);
            for (j, (o, &uv)) in d_pre.row_mut(i).iter_mut().zip(u.row(i)).enumerate() {
                grads.q.data_mut()[j] += ds * uv;
                *o = ds * q[j] * (1.0 - uv * uv);
            }
        }
        let p = attn.projection_index(e);
        let proj = &attn.proj[p];
        grads.proj[p]
            .w
            .add_scaled(1.0, &d_pre.matmul_tn(state.embedding(c))?)?;
        for (gb, s) in grads.proj[p].b.data_mut().iter_mut().zip(d_pre.column_sums()) {
            *gb += s;
        }
        d_emb[e].add_scaled(1.0, &d_pre.matmul(&proj.w)?)?;
    }
    Ok(d_emb)
}

/// Gradients with the common channel's two branch contributions kept apart.
#[derive(Debug, Clone)]
pub struct BackwardOutput {
    pub grads: Gradients,
    /// Common-channel gradient through the topology-graph branch only.
    pub common_via_topology: GcnChannelParams,
    /// Common-channel gradient through the feature-graph branch only.
    pub common_via_feature: GcnChannelParams,
    pub loss: LossBreakdown,
}

/// Exact gradient of the total loss w.r.t. every parameter tensor.
pub fn backward(
    state: &ForwardState,
    inputs: &ModelInputs,
    params: &ModelParams,
    objective: &Objective<'_>,
) -> Result<Gradients> {
    backward_detailed(state, inputs, params, objective).map(|out| out.grads)
}

pub fn backward_detailed(
    state: &ForwardState,
    inputs: &ModelInputs,
    params: &ModelParams,
    objective: &Objective<'_>,
) -> Result<BackwardOutput> {
    if !state.training {
        return Err(Error::MissingCache("dropout"));
    }
    let loss = loss_breakdown(state, objective)?;
    let mut grads = params.zeros_like();

    // Classifier.
    let d_logits = logits_grad(state, objective)?;
    grads.clf.w = d_logits.matmul_tn(&state.z)?;
    grads.clf.b = DenseMatrix::new(1, d_logits.cols(), d_logits.column_sums())?;
    let dz = d_logits.matmul(&params.clf.w)?;

    // Attention fusion.
    let [mut d_zt, d_zc, mut d_zf] = attention_backward(state, &params.attn, &dz, &mut grads.attn)?;
    let mut d_zct = d_zc.clone();
    d_zct.scale(0.5);
    let mut d_zcf = d_zct.clone();

    // Constraint terms.
    let active = state.options.active;
    let LossWeights { gamma, beta } = objective.weights;
    if active.contains(Channel::Common) {
        if gamma != 0.0 {
            let (_, g_ct, g_cf) = consistency_loss_grad(state.z_ct(), state.z_cf())?;
            d_zct.add_scaled(gamma, &g_ct)?;
            d_zcf.add_scaled(gamma, &g_cf)?;
        }
        if beta != 0.0 && active.contains(Channel::Topology) {
            let (_, g_t, g_ct) = hsic_grad(state.z_t(), state.z_ct())?;
            d_zt.add_scaled(beta, &g_t)?;
            d_zct.add_scaled(beta, &g_ct)?;
        }
        if beta != 0.0 && active.contains(Channel::Feature) {
            let (_, g_f, g_cf) = hsic_grad(state.z_f(), state.z_cf())?;
            d_zf.add_scaled(beta, &g_f)?;
            d_zcf.add_scaled(beta, &g_cf)?;
        }
    }

    // Branches.
    let x = &inputs.x;
    grads.topo = channel_backward(&inputs.topology, x, &state.topo, &params.topo, &d_zt)?;
    grads.feat = channel_backward(&inputs.feature, x, &state.feat, &params.feat, &d_zf)?;
    let common_via_topology = channel_backward(&inputs.topology, x, &state.common_t, &params.common, &d_zct)?;
    let common_via_feature = channel_backward(&inputs.feature, x, &state.common_f, &params.common, &d_zcf)?;
    grads.common = common_via_topology.clone();
    grads.common.w1.add_scaled(1.0, &common_via_feature.w1)?;
    grads.common.w2.add_scaled(1.0, &common_via_feature.w2)?;

    Ok(BackwardOutput {
        grads,
        common_via_topology,
        common_via_feature,
        loss,
    })
}
