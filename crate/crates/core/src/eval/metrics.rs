use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of evaluated nodes whose true class this is.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn check(pred: &[usize], truth: &[usize], idx: &[usize]) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::InvalidInput("metrics over an empty index set".into()));
    }
    if let Some(&i) = idx.iter().find(|&&i| i >= pred.len() || i >= truth.len()) {
        return Err(Error::InvalidInput(format!("metric index {i} out of range")));
    }
    Ok(())
}

/// Fraction of `idx` where prediction and truth agree.
pub fn accuracy(pred: &[usize], truth: &[usize], idx: &[usize]) -> Result<f64> {
    check(pred, truth, idx)?;
    Ok(idx.iter().filter(|&&i| pred[i] == truth[i]).count() as f64 / idx.len() as f64)
}

/// Unweighted mean of per-class F1 over classes `0..num_classes`. Undefined
/// precision or recall counts as 0, so a class that never occurs among
/// predictions or truth scores F1 = 0.
pub fn macro_f1(pred: &[usize], truth: &[usize], idx: &[usize], num_classes: usize) -> Result<f64> {
    Ok(MetricsReport::compute(pred, truth, idx, num_classes)?.macro_f1)
}

impl MetricsReport {
    pub fn compute(pred: &[usize], truth: &[usize], idx: &[usize], num_classes: usize) -> Result<Self> {
        check(pred, truth, idx)?;
        let mut tp = vec![0usize; num_classes];
        let mut predicted = vec![0usize; num_classes];
        let mut actual = vec![0usize; num_classes];
        for &i in idx {
            let (p, t) = (pred[i], truth[i]);
            if p >= num_classes || t >= num_classes {
                return Err(Error::InvalidInput(format!(
                    "class id {} at node {i} exceeds {num_classes} classes",
                    p.max(t)
                )));
            }
            predicted[p] += 1;
            actual[t] += 1;
            if p == t {
                tp[p] += 1;
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let per_class: Vec<ClassMetrics> = (0..num_classes)
            .map(|c| {
                let precision = ratio(tp[c], predicted[c]);
                let recall = ratio(tp[c], actual[c]);
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassMetrics {
                    class: c,
                    precision,
                    recall,
                    f1,
                    support: actual[c],
                }
            })
            .collect();
        let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / num_classes.max(1) as f64;
        Ok(Self {
            accuracy: ratio(tp.iter().sum(), idx.len()),
            macro_f1,
            per_class,
        })
    }
}
