use serde::{Deserialize, Serialize};

use super::config::DecayScope;
use crate::error::{dim_mismatch, Result};
use crate::graph::DenseMatrix;
use crate::model::{Gradients, ModelParams, TensorKind};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// Adam moments for every parameter tensor, in [`ModelParams::tensors`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub weight_decay: f64,
    pub scope: DecayScope,
    pub step: u64,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
}

impl AdamState {
    pub fn new(params: &ModelParams, lr: f64, weight_decay: f64, scope: DecayScope) -> Self {
        let zeros: Vec<DenseMatrix> = params
            .tensors()
            .into_iter()
            .map(|(_, _, t)| DenseMatrix::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            lr,
            weight_decay,
            scope,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// Index range of the GCN weight tensors in [`ModelParams::tensors`] order.
const GCN_TENSORS: usize = 6;

/// One bias-corrected Adam step with decoupled weight decay:
/// `θ ← θ − lr · (m̂ / (√v̂ + ε) + wd · θ)`, the decay term on weights only.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, opt: &mut AdamState) -> Result<()> {
    let grads = grads.tensors();
    if grads.len() != opt.m.len() {
        return Err(dim_mismatch(
            "adam_step",
            format!("{} gradient tensors for {} moments", grads.len(), opt.m.len()),
        ));
    }
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (idx, ((kind, theta), (_, _, g))) in params.tensors_mut().into_iter().zip(&grads).enumerate() {
        if theta.shape() != g.shape() || theta.shape() != opt.m[idx].shape() {
            return Err(dim_mismatch(
                "adam_step",
                format!("tensor {idx}: {:?} vs gradient {:?}", theta.shape(), g.shape()),
            ));
        }
        let decays = kind == TensorKind::Weight
            && match opt.scope {
                DecayScope::All => true,
                DecayScope::Gcn => idx < GCN_TENSORS,
            };
        let wd = if decays { opt.weight_decay } else { 0.0 };
        let m = opt.m[idx].data_mut();
        let v = opt.v[idx].data_mut();
        for (((p, &gv), mv), vv) in theta.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *mv = BETA1 * *mv + (1.0 - BETA1) * gv;
            *vv = BETA2 * *vv + (1.0 - BETA2) * gv * gv;
            let update = (*mv / c1) / ((*vv / c2).sqrt() + EPS);
            *p -= opt.lr * (update + wd * *p);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelDims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> ModelParams {
        let dims = ModelDims {
            input: 3,
            nhid1: 2,
            nhid2: 2,
            attn_hidden: 2,
            classes: 2,
            attn_per_channel: false,
        };
        ModelParams::init(&dims, &mut ChaCha8Rng::seed_from_u64(3))
    }

    #[test]
    fn zero_gradient_no_decay_is_identity() {
        let mut p = params();
        let before = p.clone();
        let g = p.zeros_like();
        let mut opt = AdamState::new(&p, 0.01, 0.0, DecayScope::All);
        adam_step(&mut p, &g, &mut opt).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.clf.b.fill(1.0);
        let mut opt = AdamState::new(&p, 0.01, 0.0, DecayScope::All);
        adam_step(&mut p, &g, &mut opt).unwrap();
        for (a, b) in p.clf.b.data().iter().zip(before.clf.b.data()) {
            assert!(((b - a) - 0.01).abs() < 1e-9);
        }
    }

    #[test]
    fn decay_skips_biases_and_respects_scope() {
        let mut p = params();
        p.clf.b.fill(1.0);
        let before = p.clone();
        let g = p.zeros_like();
        let mut opt = AdamState::new(&p, 0.1, 0.5, DecayScope::Gcn);
        adam_step(&mut p, &g, &mut opt).unwrap();
        assert_eq!(p.clf.b, before.clf.b);
        assert_eq!(p.clf.w, before.clf.w);
        let expected = before.topo.w1.map(|v| v * (1.0 - 0.05));
        assert!(p.topo.w1.max_abs_diff(&expected) < 1e-15);

        let mut q = before.clone();
        let mut opt = AdamState::new(&q, 0.1, 0.5, DecayScope::All);
        adam_step(&mut q, &g, &mut opt).unwrap();
        assert_ne!(q.clf.w, before.clf.w);
        assert_eq!(q.clf.b, before.clf.b);
    }
}
