use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::params::{AttentionParams, ClassifierParams, GcnChannelParams, ModelParams};
use crate::error::{dim_mismatch, Error, Result};
use crate::graph::{dot, spmm, DenseMatrix, NormalizedAdjacency};

/// The three embeddings fused by attention, in `alpha` column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Topology = 0,
    Common = 1,
    Feature = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Topology, Channel::Common, Channel::Feature];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Topology => "topology",
            Channel::Common => "common",
            Channel::Feature => "feature",
        }
    }
}

/// Subset of channels taking part in attention fusion. Written as a string of
/// the letters `t`, `c`, `f`, e.g. `"tcf"` (the full model) or `"f"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChannelSet(u8);

impl ChannelSet {
    pub const ALL: ChannelSet = ChannelSet(0b111);

    pub fn only(channel: Channel) -> Self {
        ChannelSet(1 << channel.index())
    }

    pub fn contains(self, channel: Channel) -> bool {
        self.0 & (1 << channel.index()) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Channel> {
        Channel::ALL.into_iter().filter(move |&c| self.contains(c))
    }

    pub fn is_full(self) -> bool {
        self == Self::ALL
    }
}

impl Default for ChannelSet {
    fn default() -> Self {
        Self::ALL
    }
}

impl FromStr for ChannelSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = 0u8;
        for ch in s.trim().chars() {
            bits |= match ch.to_ascii_lowercase() {
                't' => 1 << Channel::Topology.index(),
                'c' => 1 << Channel::Common.index(),
                'f' => 1 << Channel::Feature.index(),
                other => {
                    return Err(Error::InvalidInput(format!(
                        "unknown channel '{other}' in '{s}' (expected letters t, c, f)"
                    )))
                }
            };
        }
        if bits == 0 {
            return Err(Error::InvalidInput("channel set is empty".into()));
        }
        Ok(ChannelSet(bits))
    }
}

impl TryFrom<String> for ChannelSet {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ChannelSet> for String {
    fn from(c: ChannelSet) -> String {
        c.to_string()
    }
}

impl fmt::Display for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, letter) in Channel::ALL.iter().zip(['t', 'c', 'f']) {
            if self.contains(*c) {
                write!(f, "{letter}")?;
            }
        }
        Ok(())
    }
}

/// Whether a forward pass samples dropout masks.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardOptions {
    pub dropout: f64,
    pub active: ChannelSet,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            dropout: 0.0,
            active: ChannelSet::ALL,
        }
    }
}

/// Inverted-dropout mask: kept entries are scaled by `1 / (1 - rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<bool>,
    scale: f64,
}

impl DropoutMask {
    fn sample(len: usize, rate: f64, rng: &mut dyn RngCore) -> Self {
        Self {
            keep: (0..len).map(|_| rng.random::<f64>() >= rate).collect(),
            scale: 1.0 / (1.0 - rate),
        }
    }

    pub fn apply(&self, m: &DenseMatrix) -> DenseMatrix {
        let mut out = m.clone();
        for (v, &k) in out.data_mut().iter_mut().zip(&self.keep) {
            *v = if k { *v * self.scale } else { 0.0 };
        }
        out
    }

    pub fn kept_fraction(&self) -> f64 {
        self.keep.iter().filter(|&&k| k).count() as f64 / self.keep.len().max(1) as f64
    }
}

fn dropout(m: &DenseMatrix, rate: f64, mode: &mut Mode<'_>) -> (DenseMatrix, Option<DropoutMask>) {
    match mode {
        Mode::Train(rng) if rate > 0.0 => {
            let mask = DropoutMask::sample(m.data().len(), rate, &mut **rng);
            (mask.apply(m), Some(mask))
        }
        _ => (m.clone(), None),
    }
}

fn relu(m: &DenseMatrix) -> DenseMatrix {
    m.map(|v| v.max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnLayerOutput {
    /// `N · H · W` before the activation.
    pub pre: DenseMatrix,
    pub out: DenseMatrix,
}

/// One graph convolution, `ReLU(N · H · W)` (or the linear map when
/// `activate` is false).
pub fn gcn_layer(
    adj: &NormalizedAdjacency,
    h: &DenseMatrix,
    w: &DenseMatrix,
    activate: bool,
) -> Result<GcnLayerOutput> {
    let pre = spmm(adj, &h.matmul(w)?)?;
    let out = if activate { relu(&pre) } else { pre.clone() };
    Ok(GcnLayerOutput { pre, out })
}

/// Everything one 2-layer branch needs for its backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    pub input_mask: Option<DropoutMask>,
    pub pre1: DenseMatrix,
    pub hidden_mask: Option<DropoutMask>,
    /// Input of the second layer: `ReLU(pre1)` after dropout.
    pub hidden: DenseMatrix,
    pub pre2: DenseMatrix,
    pub output: DenseMatrix,
}

/// Two stacked GCN layers with ReLU after each; dropout on each layer's input
/// while training.
pub fn channel_forward(
    adj: &NormalizedAdjacency,
    x: &DenseMatrix,
    params: &GcnChannelParams,
    dropout_rate: f64,
    mode: &mut Mode<'_>,
) -> Result<ChannelTrace> {
    let (x_in, input_mask) = dropout(x, dropout_rate, mode);
    let l1 = gcn_layer(adj, &x_in, &params.w1, true)?;
    let (hidden, hidden_mask) = dropout(&l1.out, dropout_rate, mode);
    let l2 = gcn_layer(adj, &hidden, &params.w2, true)?;
    Ok(ChannelTrace {
        input_mask,
        pre1: l1.pre,
        hidden_mask,
        hidden,
        pre2: l2.pre,
        output: l2.out,
    })
}

/// The shared-weight channel on both graphs: `(Z_CT, Z_CF, Z_C)` traces, with
/// `Z_C` their mean.
pub fn common_forward(
    adj_t: &NormalizedAdjacency,
    adj_f: &NormalizedAdjacency,
    x: &DenseMatrix,
    params: &GcnChannelParams,
    dropout_rate: f64,
    mode: &mut Mode<'_>,
) -> Result<(ChannelTrace, ChannelTrace, DenseMatrix)> {
    let ct = channel_forward(adj_t, x, params, dropout_rate, mode)?;
    let cf = channel_forward(adj_f, x, params, dropout_rate, mode)?;
    let zc = ct.output.zip_map(&cf.output, |a, b| 0.5 * (a + b))?;
    Ok((ct, cf, zc))
}

/// Numerically stable softmax over a slice.
pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in xs.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in xs.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    /// `tanh(Z_e Wᵀ + b)` per channel (`None` for inactive channels).
    pub hidden: [Option<DenseMatrix>; 3],
    /// Raw scores `ω`, `n × 3`; zero in inactive columns.
    pub scores: DenseMatrix,
    /// Softmax weights, `n × 3`; zero in inactive columns.
    pub alpha: DenseMatrix,
}

/// Per-node attention fusion of `[Z_T, Z_C, Z_F]` restricted to `active`.
pub fn attention_fuse_masked(
    embeddings: [&DenseMatrix; 3],
    attn: &AttentionParams,
    active: ChannelSet,
) -> Result<(DenseMatrix, AttentionTrace)> {
    let (n, h) = embeddings[0].shape();
    if embeddings.iter().any(|z| z.shape() != (n, h)) {
        return Err(dim_mismatch("attention_fuse", "embeddings differ in shape"));
    }
    let q = attn.q.data();
    let mut scores = DenseMatrix::zeros(n, 3);
    let mut hidden: [Option<DenseMatrix>; 3] = [None, None, None];
    for c in active.iter() {
        let e = c.index();
        let proj = attn.projection(e);
        if proj.w.cols() != h {
            return Err(dim_mismatch(
                "attention_fuse",
                format!("attention weight has {} columns, embedding {h}", proj.w.cols()),
            ));
        }
        let mut u = embeddings[e].matmul_nt(&proj.w)?;
        let b = proj.b.data();
        for i in 0..n {
            let row = u.row_mut(i);
            for (v, bj) in row.iter_mut().zip(b) {
                *v = (*v + bj).tanh();
            }
            scores.set(i, e, dot(row, q));
        }
        hidden[e] = Some(u);
    }
    let active_cols: Vec<usize> = active.iter().map(Channel::index).collect();
    let mut alpha = DenseMatrix::zeros(n, 3);
    let mut z = DenseMatrix::zeros(n, h);
    let mut buf = vec![0.0; active_cols.len()];
    for i in 0..n {
        for (slot, &e) in buf.iter_mut().zip(&active_cols) {
            *slot = scores.get(i, e);
        }
        softmax_in_place(&mut buf);
        let zi = z.row_mut(i);
        for (&a, &e) in buf.iter().zip(&active_cols) {
            alpha.set(i, e, a);
            for (o, v) in zi.iter_mut().zip(embeddings[e].row(i)) {
                *o += a * v;
            }
        }
    }
    Ok((
        z,
        AttentionTrace {
            hidden,
            scores,
            alpha,
        },
    ))
}

/// Attention fusion over all three embeddings; returns `Z` and `alpha`.
pub fn attention_fuse(
    z_t: &DenseMatrix,
    z_c: &DenseMatrix,
    z_f: &DenseMatrix,
    attn: &AttentionParams,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (z, trace) = attention_fuse_masked([z_t, z_c, z_f], attn, ChannelSet::ALL)?;
    Ok((z, trace.alpha))
}

/// Linear layer plus row softmax: `(logits, probabilities)`.
pub fn classify(z: &DenseMatrix, clf: &ClassifierParams) -> Result<(DenseMatrix, DenseMatrix)> {
    let mut logits = z.matmul_nt(&clf.w)?;
    let b = clf.b.data();
    for i in 0..logits.rows() {
        for (v, bj) in logits.row_mut(i).iter_mut().zip(b) {
            *v += bj;
        }
    }
    let mut probs = logits.clone();
    for i in 0..probs.rows() {
        softmax_in_place(probs.row_mut(i));
    }
    Ok((logits, probs))
}

/// Node features and both normalized graphs.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub x: DenseMatrix,
    pub topology: NormalizedAdjacency,
    pub feature: NormalizedAdjacency,
}

impl ModelInputs {
    pub fn node_count(&self) -> usize {
        self.x.rows()
    }
}

/// All intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardState {
    pub topo: ChannelTrace,
    pub common_t: ChannelTrace,
    pub common_f: ChannelTrace,
    pub feat: ChannelTrace,
    pub z_c: DenseMatrix,
    pub z: DenseMatrix,
    pub attention: AttentionTrace,
    pub logits: DenseMatrix,
    pub probs: DenseMatrix,
    pub options: ForwardOptions,
    pub training: bool,
}

impl ForwardState {
    pub fn z_t(&self) -> &DenseMatrix {
        &self.topo.output
    }

    pub fn z_f(&self) -> &DenseMatrix {
        &self.feat.output
    }

    pub fn z_ct(&self) -> &DenseMatrix {
        &self.common_t.output
    }

    pub fn z_cf(&self) -> &DenseMatrix {
        &self.common_f.output
    }

    /// `n × 3` attention weights in `T, C, F` column order.
    pub fn alpha(&self) -> &DenseMatrix {
        &self.attention.alpha
    }

    pub fn embedding(&self, channel: Channel) -> &DenseMatrix {
        match channel {
            Channel::Topology => self.z_t(),
            Channel::Common => &self.z_c,
            Channel::Feature => self.z_f(),
        }
    }

    /// Arg-max class per node; ties go to the lower class id.
    pub fn predictions(&self) -> Vec<usize> {
        self.probs
            .row_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |best, (c, &p)| if p > best.1 { (c, p) } else { best },
                    )
                    .0
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        [
            &self.topo.output,
            &self.common_t.output,
            &self.common_f.output,
            &self.feat.output,
            &self.z_c,
            &self.z,
            &self.attention.alpha,
            &self.logits,
            &self.probs,
        ]
        .iter()
        .all(|m| m.is_finite())
    }
}

/// The full model: both specific channels, the common channel on both graphs,
/// attention fusion and the classifier.
///
/// Dropout masks are drawn in branch order topology, common-on-topology,
/// common-on-feature, feature; each branch draws its input mask then its hidden
/// mask.
pub fn full_forward(
    inputs: &ModelInputs,
    params: &ModelParams,
    options: ForwardOptions,
    mut mode: Mode<'_>,
) -> Result<ForwardState> {
    if !(0.0..1.0).contains(&options.dropout) {
        return Err(Error::InvalidInput(format!(
            "dropout must be in [0, 1), got {}",
            options.dropout
        )));
    }
    let (x, p) = (&inputs.x, options.dropout);
    let topo = channel_forward(&inputs.topology, x, &params.topo, p, &mut mode)?;
    let (common_t, common_f, z_c) =
        common_forward(&inputs.topology, &inputs.feature, x, &params.common, p, &mut mode)?;
    let feat = channel_forward(&inputs.feature, x, &params.feat, p, &mut mode)?;
    let (z, attention) =
        attention_fuse_masked([&topo.output, &z_c, &feat.output], &params.attn, options.active)?;
    let (logits, probs) = classify(&z, &params.clf)?;
    Ok(ForwardState {
        topo,
        common_t,
        common_f,
        feat,
        z_c,
        z,
        attention,
        logits,
        probs,
        options,
        training: mode.is_training(),
    })
}
