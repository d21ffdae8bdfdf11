//! Central finite-difference verification of [`backward`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::backward::{backward, loss_breakdown, Objective};
use crate::error::Result;
use crate::graph::{build_knn_graph, normalize_adjacency, DenseMatrix, SimilarityMetric, SparseGraph};
use crate::losses::LossWeights;
use crate::model::{
    full_forward, ChannelSet, ForwardOptions, Gradients, Mode, ModelDims, ModelInputs, ModelParams,
};

/// Size and weighting of the random instance a gradient check runs on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    pub nhid1: usize,
    pub nhid2: usize,
    pub attn_hidden: usize,
    pub train_nodes: usize,
    pub gamma: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub tolerance: f64,
    pub attn_per_channel: bool,
    pub ce_mean: bool,
    pub channels: ChannelSet,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            nodes: 30,
            features: 8,
            classes: 3,
            nhid1: 8,
            nhid2: 4,
            attn_hidden: 6,
            train_nodes: 12,
            gamma: 0.001,
            beta: 1e-9,
            epsilon: 1e-5,
            tolerance: 1e-4,
            attn_per_channel: false,
            ce_mean: false,
            channels: ChannelSet::ALL,
        }
    }
}

/// Smallest `|pre-activation|` a gradient-check instance accepts.
pub const KINK_MARGIN: f64 = 1e-4;
const MAX_REDRAWS: usize = 100;

/// Smallest absolute ReLU input over every channel and layer.
pub fn relu_margin(inputs: &ModelInputs, params: &ModelParams) -> Result<f64> {
    let state = full_forward(inputs, params, ForwardOptions::default(), Mode::Eval)?;
    Ok([&state.topo, &state.common_t, &state.common_f, &state.feat]
        .iter()
        .flat_map(|t| t.pre1.data().iter().chain(t.pre2.data()))
        .fold(f64::INFINITY, |m, v| m.min(v.abs())))
}

/// A small seeded problem: features, both graphs, labels and parameters.
#[derive(Debug, Clone)]
pub struct GradcheckInstance {
    pub inputs: ModelInputs,
    pub params: ModelParams,
    pub labels: Vec<usize>,
    pub train_idx: Vec<usize>,
}

impl GradcheckInstance {
    pub fn new(cfg: &GradcheckConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = cfg.nodes;
        let labels: Vec<usize> = (0..n).map(|i| i % cfg.classes).collect();
        // Class-shifted Gaussian features so both graphs carry some signal.
        let x = DenseMatrix::from_fn(n, cfg.features, |i, j| {
            let shift = if j % cfg.classes == labels[i] { 1.0 } else { 0.0 };
            shift + rng.sample::<f64, _>(StandardNormal)
        });
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < 0.15 {
                    edges.push((i, j));
                }
            }
        }
        let topology = SparseGraph::from_edges(n, &edges)?;
        let feature = build_knn_graph(&x, 3.min(n - 1), SimilarityMetric::Cosine)?;
        let dims = ModelDims {
            input: cfg.features,
            nhid1: cfg.nhid1,
            nhid2: cfg.nhid2,
            attn_hidden: cfg.attn_hidden,
            classes: cfg.classes,
            attn_per_channel: cfg.attn_per_channel,
        };
        let inputs = ModelInputs {
            topology: normalize_adjacency(&topology),
            feature: normalize_adjacency(&feature),
            x,
        };
        // Central differences straddling a ReLU kink measure nothing useful, so
        // redraw until every pre-activation clears the margin.
        let mut params = ModelParams::init(&dims, &mut rng);
        for _ in 0..MAX_REDRAWS {
            if relu_margin(&inputs, &params)? >= KINK_MARGIN {
                break;
            }
            params = ModelParams::init(&dims, &mut rng);
        }
        let train_idx = (0..cfg.train_nodes.min(n)).collect();
        Ok(Self {
            inputs,
            params,
            labels,
            train_idx,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub max_abs_error: f64,
    /// `max|analytic − numeric| / max(max|analytic|, max|numeric|)`.
    pub relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.tensors
            .iter()
            .filter(|t| !t.passed)
            .map(|t| t.name.as_str())
            .collect()
    }

    pub fn max_relative_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.relative_error).fold(0.0, f64::max)
    }
}

fn total_at(
    inputs: &ModelInputs,
    params: &ModelParams,
    objective: &Objective<'_>,
    options: ForwardOptions,
) -> Result<f64> {
    let state = full_forward(inputs, params, options, Mode::Eval)?;
    Ok(loss_breakdown(&state, objective)?.total)
}

/// Compares `analytic` against central differences of the total loss, one
/// parameter entry at a time. Dropout must be off in `options`.
pub fn check_gradients(
    inputs: &ModelInputs,
    params: &ModelParams,
    objective: &Objective<'_>,
    options: ForwardOptions,
    analytic: &Gradients,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradcheckReport> {
    let mut probe = params.clone();
    let names: Vec<String> = params.tensors().into_iter().map(|(n, _, _)| n).collect();
    let analytic_tensors = analytic.tensors();
    let mut tensors = Vec::with_capacity(names.len());
    for (t, name) in names.into_iter().enumerate() {
        let len = probe.tensor_mut(t).data().len();
        let mut numeric = Vec::with_capacity(len);
        for k in 0..len {
            let orig = probe.tensor_mut(t).data()[k];
            probe.tensor_mut(t).data_mut()[k] = orig + epsilon;
            let plus = total_at(inputs, &probe, objective, options)?;
            probe.tensor_mut(t).data_mut()[k] = orig - epsilon;
            let minus = total_at(inputs, &probe, objective, options)?;
            probe.tensor_mut(t).data_mut()[k] = orig;
            numeric.push((plus - minus) / (2.0 * epsilon));
        }
        let a = analytic_tensors[t].2.data();
        let max_abs_error = a
            .iter()
            .zip(&numeric)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let scale = a.iter().chain(&numeric).map(|v| v.abs()).fold(1e-12, f64::max);
        let relative_error = max_abs_error / scale;
        tensors.push(TensorCheck {
            name,
            max_abs_error,
            relative_error,
            passed: relative_error < tolerance,
        });
    }
    Ok(GradcheckReport { tolerance, tensors })
}

/// Builds the seeded instance, runs [`backward`] and checks every tensor.
pub fn finite_difference_check(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let inst = GradcheckInstance::new(cfg)?;
    let objective = Objective {
        labels: &inst.labels,
        train_idx: &inst.train_idx,
        weights: LossWeights::new(cfg.gamma, cfg.beta)?,
        ce_mean: cfg.ce_mean,
    };
    let options = ForwardOptions {
        dropout: 0.0,
        active: cfg.channels,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let state = full_forward(&inst.inputs, &inst.params, options, Mode::Train(&mut rng))?;
    let grads = backward(&state, &inst.inputs, &inst.params, &objective)?;
    check_gradients(
        &inst.inputs,
        &inst.params,
        &objective,
        options,
        &grads,
        cfg.epsilon,
        cfg.tolerance,
    )
}
