use serde::{Deserialize, Serialize};

use crate::model::{Channel, ForwardState};
use crate::training::TrainHistory;

/// Attention at convergence plus its per-epoch trend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    /// `(α_T, α_C, α_F)` per node.
    pub per_node: Vec<[f64; 3]>,
    pub mean: [f64; 3],
    pub std: [f64; 3],
    /// Mean attention after every epoch.
    pub trend: Vec<[f64; 3]>,
}

impl AttentionReport {
    pub fn new(history: &TrainHistory, state: &ForwardState) -> Self {
        let alpha = state.alpha();
        let per_node: Vec<[f64; 3]> = alpha.row_iter().map(|r| [r[0], r[1], r[2]]).collect();
        let n = per_node.len().max(1) as f64;
        let mut mean = [0.0; 3];
        for row in &per_node {
            for e in 0..3 {
                mean[e] += row[e] / n;
            }
        }
        let mut std = [0.0; 3];
        for row in &per_node {
            for e in 0..3 {
                std[e] += (row[e] - mean[e]).powi(2) / n;
            }
        }
        std.iter_mut().for_each(|s| *s = s.sqrt());
        Self {
            per_node,
            mean,
            std,
            trend: history.epochs.iter().map(|r| r.mean_alpha).collect(),
        }
    }

    /// Channel with the largest mean attention; ties go to the earlier one in
    /// `T, C, F` order.
    pub fn dominant(&self) -> Channel {
        let mut best = Channel::Topology;
        for c in Channel::ALL {
            if self.mean[c.index()] > self.mean[best.index()] {
                best = c;
            }
        }
        best
    }

    pub fn verdict(&self) -> String {
        let [t, c, f] = self.mean;
        format!(
            "{} channel holds the largest mean attention (T {t:.3}, C {c:.3}, F {f:.3})",
            self.dominant().name()
        )
    }
}
