use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DenseMatrix;

/// Layer sizes of the whole model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub nhid1: usize,
    pub nhid2: usize,
    /// Hidden width `h'` of the attention transform.
    pub attn_hidden: usize,
    pub classes: usize,
    /// One attention transform per channel instead of a single shared one.
    pub attn_per_channel: bool,
}

/// Two stacked GCN weight matrices, `input × nhid1` then `nhid1 × nhid2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnChannelParams {
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
}

/// Scoring transform `tanh(W z + b)` for one or more channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionProjection {
    /// `h' × h`
    pub w: DenseMatrix,
    /// `1 × h'`
    pub b: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    /// Either a single projection shared by all three channels or one per
    /// channel in `T, C, F` order.
    pub proj: Vec<AttentionProjection>,
    /// Shared attention vector, stored as `1 × h'`.
    pub q: DenseMatrix,
}

impl AttentionParams {
    pub fn projection(&self, channel_index: usize) -> &AttentionProjection {
        if self.proj.len() == 1 {
            &self.proj[0]
        } else {
            &self.proj[channel_index]
        }
    }

    pub(crate) fn projection_index(&self, channel_index: usize) -> usize {
        if self.proj.len() == 1 {
            0
        } else {
            channel_index
        }
    }
}

/// Output layer; separate from the attention transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    /// `C × h`
    pub w: DenseMatrix,
    /// `1 × C`
    pub b: DenseMatrix,
}

/// Every trainable tensor. The common channel's weights are applied to both
/// graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub topo: GcnChannelParams,
    pub feat: GcnChannelParams,
    pub common: GcnChannelParams,
    pub attn: AttentionParams,
    pub clf: ClassifierParams,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Weight,
    Bias,
}

fn glorot(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut dyn RngCore) -> DenseMatrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

impl GcnChannelParams {
    fn init(dims: &ModelDims, rng: &mut dyn RngCore) -> Self {
        Self {
            w1: glorot(dims.input, dims.nhid1, dims.input, dims.nhid1, rng),
            w2: glorot(dims.nhid1, dims.nhid2, dims.nhid1, dims.nhid2, rng),
        }
    }
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases. Draw order: topology, feature and
    /// common channel (`w1` then `w2` each), attention projections, `q`,
    /// classifier weights.
    pub fn init(dims: &ModelDims, rng: &mut dyn RngCore) -> Self {
        let topo = GcnChannelParams::init(dims, rng);
        let feat = GcnChannelParams::init(dims, rng);
        let common = GcnChannelParams::init(dims, rng);
        let n_proj = if dims.attn_per_channel { 3 } else { 1 };
        let proj = (0..n_proj)
            .map(|_| AttentionProjection {
                w: glorot(dims.attn_hidden, dims.nhid2, dims.nhid2, dims.attn_hidden, rng),
                b: DenseMatrix::zeros(1, dims.attn_hidden),
            })
            .collect();
        let q = glorot(1, dims.attn_hidden, dims.attn_hidden, 1, rng);
        let clf = ClassifierParams {
            w: glorot(dims.classes, dims.nhid2, dims.nhid2, dims.classes, rng),
            b: DenseMatrix::zeros(1, dims.classes),
        };
        Self {
            topo,
            feat,
            common,
            attn: AttentionParams { proj, q },
            clf,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input: self.topo.w1.rows(),
            nhid1: self.topo.w1.cols(),
            nhid2: self.topo.w2.cols(),
            attn_hidden: self.attn.q.cols(),
            classes: self.clf.w.rows(),
            attn_per_channel: self.attn.proj.len() == 3,
        }
    }

    /// Same layout, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, m) in z.tensors_mut() {
            m.fill(0.0);
        }
        z
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, TensorKind, &DenseMatrix)> {
        use TensorKind::*;
        let mut out = vec![
            ("topo.w1".to_string(), Weight, &self.topo.w1),
            ("topo.w2".to_string(), Weight, &self.topo.w2),
            ("feat.w1".to_string(), Weight, &self.feat.w1),
            ("feat.w2".to_string(), Weight, &self.feat.w2),
            ("common.w1".to_string(), Weight, &self.common.w1),
            ("common.w2".to_string(), Weight, &self.common.w2),
        ];
        for (i, p) in self.attn.proj.iter().enumerate() {
            out.push((format!("attn.w[{i}]"), Weight, &p.w));
            out.push((format!("attn.b[{i}]"), Bias, &p.b));
        }
        out.push(("attn.q".to_string(), Weight, &self.attn.q));
        out.push(("clf.w".to_string(), Weight, &self.clf.w));
        out.push(("clf.b".to_string(), Bias, &self.clf.b));
        out
    }

    /// Mutable tensors in the order of [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(TensorKind, &mut DenseMatrix)> {
        use TensorKind::*;
        let mut out = vec![
            (Weight, &mut self.topo.w1),
            (Weight, &mut self.topo.w2),
            (Weight, &mut self.feat.w1),
            (Weight, &mut self.feat.w2),
            (Weight, &mut self.common.w1),
            (Weight, &mut self.common.w2),
        ];
        for p in &mut self.attn.proj {
            out.push((Weight, &mut p.w));
            out.push((Bias, &mut p.b));
        }
        out.push((Weight, &mut self.attn.q));
        out.push((Weight, &mut self.clf.w));
        out.push((Bias, &mut self.clf.b));
        out
    }

    pub fn tensor_mut(&mut self, index: usize) -> &mut DenseMatrix {
        self.tensors_mut()
            .into_iter()
            .nth(index)
            .map(|(_, m)| m)
            .unwrap_or_else(|| panic!("tensor index {index} out of range"))
    }

    /// Checks shapes are mutually consistent and every value finite.
    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        let expect = |name: &str, m: &DenseMatrix, shape: (usize, usize)| -> Result<()> {
            if m.shape() != shape {
                return Err(Error::Checkpoint(format!(
                    "{name} has shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
            if !m.is_finite() {
                return Err(Error::Checkpoint(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        for (name, ch) in [
            ("topo", &self.topo),
            ("feat", &self.feat),
            ("common", &self.common),
        ] {
            expect(name, &ch.w1, (d.input, d.nhid1))?;
            expect(name, &ch.w2, (d.nhid1, d.nhid2))?;
        }
        if !matches!(self.attn.proj.len(), 1 | 3) {
            return Err(Error::Checkpoint("attention needs 1 or 3 projections".into()));
        }
        for p in &self.attn.proj {
            expect("attn.w", &p.w, (d.attn_hidden, d.nhid2))?;
            expect("attn.b", &p.b, (1, d.attn_hidden))?;
        }
        expect("attn.q", &self.attn.q, (1, d.attn_hidden))?;
        expect("clf.w", &self.clf.w, (d.classes, d.nhid2))?;
        expect("clf.b", &self.clf.b, (1, d.classes))?;
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, m)| m.data().len()).sum()
    }
}
