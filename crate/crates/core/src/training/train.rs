use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::backward::{backward_detailed, Objective};
use super::config::TrainConfig;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, normalize_adjacency};
use crate::losses::LossBreakdown;
use crate::model::{full_forward, ForwardOptions, ForwardState, Mode, ModelDims, ModelInputs, ModelParams};

/// Stream of the seeded generator used for parameter initialization.
pub const INIT_STREAM: u64 = 0;
/// Stream used for every dropout mask, epoch after epoch.
pub const DROPOUT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Loss of the training-mode forward pass the step was taken on.
    pub loss: LossBreakdown,
    /// Accuracies and attention from an eval-mode pass after the step.
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    /// Mean attention over all nodes, `T, C, F`.
    pub mean_alpha: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: TrainHistory,
    /// Eval-mode forward pass of the final parameters.
    pub state: ForwardState,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

impl TrainOutcome {
    pub fn predictions(&self) -> Vec<usize> {
        self.state.predictions()
    }
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Normalizes the dataset's graph and builds the kNN feature graph.
pub fn prepare_inputs(dataset: &LabeledDataset, config: &TrainConfig) -> Result<ModelInputs> {
    let feature_graph = build_knn_graph(&dataset.x, config.k, config.metric)?;
    Ok(ModelInputs {
        x: dataset.x.clone(),
        topology: normalize_adjacency(&dataset.graph),
        feature: normalize_adjacency(&feature_graph),
    })
}

fn fraction_correct(pred: &[usize], labels: &[usize], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    idx.iter().filter(|&&i| pred[i] == labels[i]).count() as f64 / idx.len() as f64
}

fn mean_alpha(state: &ForwardState) -> [f64; 3] {
    let means = state.alpha().column_means();
    [means[0], means[1], means[2]]
}

pub fn train(dataset: &LabeledDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let inputs = prepare_inputs(dataset, config)?;
    train_with_inputs(dataset, &inputs, config)
}

/// Full-batch training for `epoch_max` epochs on prepared inputs. Reuse the
/// inputs to train several variants on the same graphs.
pub fn train_with_inputs(
    dataset: &LabeledDataset,
    inputs: &ModelInputs,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.train_idx.is_empty() {
        return Err(Error::InvalidInput("dataset has an empty training split".into()));
    }
    if inputs.node_count() != dataset.node_count() {
        return Err(Error::InvalidInput(
            "inputs were prepared for a different dataset".into(),
        ));
    }
    let dims = ModelDims {
        input: dataset.feature_dim(),
        nhid1: config.nhid1,
        nhid2: config.nhid2,
        attn_hidden: config.attn_hidden(),
        classes: dataset.num_classes,
        attn_per_channel: config.attn_per_channel,
    };
    let mut params = ModelParams::init(&dims, &mut seeded(config.seed, INIT_STREAM));
    let mut dropout_rng = seeded(config.seed, DROPOUT_STREAM);
    let mut opt = AdamState::new(&params, config.lr, config.weight_decay, config.weight_decay_scope);
    let objective = Objective {
        labels: &dataset.labels,
        train_idx: &dataset.train_idx,
        weights: config.loss_weights(),
        ce_mean: config.ce_mean,
    };
    let train_opts = ForwardOptions {
        dropout: config.dropout,
        active: config.channels,
    };
    let eval_opts = ForwardOptions {
        dropout: 0.0,
        ..train_opts
    };

    let mut history = TrainHistory::default();
    for epoch in 0..config.epoch_max {
        let state = full_forward(inputs, &params, train_opts, Mode::Train(&mut dropout_rng))?;
        let out = backward_detailed(&state, inputs, &params, &objective)?;
        if !out.loss.total.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("{:?}", out.loss),
            });
        }
        adam_step(&mut params, &out.grads, &mut opt)?;
        let eval = full_forward(inputs, &params, eval_opts, Mode::Eval)?;
        let pred = eval.predictions();
        history.epochs.push(EpochRecord {
            epoch,
            loss: out.loss,
            train_accuracy: fraction_correct(&pred, &dataset.labels, &dataset.train_idx),
            test_accuracy: fraction_correct(&pred, &dataset.labels, &dataset.test_idx),
            mean_alpha: mean_alpha(&eval),
        });
    }

    let state = full_forward(inputs, &params, eval_opts, Mode::Eval)?;
    if !state.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: config.epoch_max,
            detail: "final forward pass produced non-finite values".into(),
        });
    }
    let pred = state.predictions();
    Ok(TrainOutcome {
        train_accuracy: fraction_correct(&pred, &dataset.labels, &dataset.train_idx),
        test_accuracy: fraction_correct(&pred, &dataset.labels, &dataset.test_idx),
        params,
        history,
        state,
    })
}
