//! File outputs of a training run. Every CSV starts with a `# amgcn <kind> v<N>`
//! line (skip it with `comment='#'` in pandas) followed by a header row.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::attention::AttentionReport;
use super::metrics::MetricsReport;
use crate::error::{Error, Result};
use crate::losses::LossBreakdown;
use crate::model::{Channel, ForwardState, ModelParams};
use crate::training::{TrainConfig, TrainHistory};

pub const HISTORY_SCHEMA: u32 = 1;
pub const ATTENTION_SCHEMA: u32 = 1;
pub const EMBEDDINGS_SCHEMA: u32 = 1;
pub const METRICS_SCHEMA: u32 = 1;
pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_FORMAT: &str = "amgcn-checkpoint";

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub fn write_history_csv(history: &TrainHistory, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# amgcn history v{HISTORY_SCHEMA}")?;
    writeln!(
        w,
        "epoch,loss_total,loss_task,loss_consistency,loss_disparity,train_accuracy,test_accuracy,alpha_t,alpha_c,alpha_f"
    )?;
    for r in &history.epochs {
        let l = &r.loss;
        let [t, c, f] = r.mean_alpha;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{t},{c},{f}",
            r.epoch, l.total, l.task, l.consistency, l.disparity, r.train_accuracy, r.test_accuracy
        )?;
    }
    Ok(w.flush()?)
}

pub fn write_attention_csv(report: &AttentionReport, labels: &[usize], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# amgcn attention v{ATTENTION_SCHEMA}")?;
    writeln!(w, "node,label,alpha_t,alpha_c,alpha_f")?;
    for (i, [t, c, f]) in report.per_node.iter().enumerate() {
        writeln!(w, "{i},{},{t},{c},{f}", labels[i])?;
    }
    Ok(w.flush()?)
}

/// Writes the fused embedding `Z` (columns `z0…`) per node, and with
/// `with_channels` also `Z_T, Z_C, Z_F` (`zt0…, zc0…, zf0…`).
pub fn export_embeddings(
    state: &ForwardState,
    labels: &[usize],
    path: &Path,
    with_channels: bool,
) -> Result<()> {
    let mut blocks = vec![("z", &state.z)];
    if with_channels {
        blocks.push(("zt", state.embedding(Channel::Topology)));
        blocks.push(("zc", state.embedding(Channel::Common)));
        blocks.push(("zf", state.embedding(Channel::Feature)));
    }
    let mut w = create(path)?;
    writeln!(w, "# amgcn embeddings v{EMBEDDINGS_SCHEMA}")?;
    let mut header = vec!["node".to_string(), "label".to_string()];
    for (prefix, m) in &blocks {
        header.extend((0..m.cols()).map(|j| format!("{prefix}{j}")));
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..state.z.rows() {
        write!(w, "{i},{}", labels[i])?;
        for (_, m) in &blocks {
            for v in m.row(i) {
                write!(w, ",{v}")?;
            }
        }
        writeln!(w)?;
    }
    Ok(w.flush()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMetrics {
    pub size: usize,
    #[serde(flatten)]
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionSummary {
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub dominant: String,
}

impl From<&AttentionReport> for AttentionSummary {
    fn from(r: &AttentionReport) -> Self {
        Self {
            mean: r.mean,
            std: r.std,
            dominant: r.dominant().name().to_string(),
        }
    }
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub schema_version: u32,
    pub variant: String,
    pub channels: String,
    pub seed: u64,
    pub epochs: usize,
    pub train: Option<SetMetrics>,
    pub test: Option<SetMetrics>,
    pub final_loss: Option<LossBreakdown>,
    pub attention: AttentionSummary,
}

impl MetricsFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).expect("metrics serialize");
        Ok(fs::write(path, json + "\n")?)
    }
}

/// Parameters with everything needed to rebuild the model on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config: TrainConfig,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(config: &TrainConfig, params: &ModelParams) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            seed: config.seed,
            config: config.clone(),
            params: params.clone(),
        }
    }

    /// JSON with shortest round-trip floats, so values reload bit for bit.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).expect("checkpoint serializes");
        Ok(fs::write(path, json)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let ck: Self = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format '{}'", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "version {} is not supported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        ck.params.validate()?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_case1;
    use crate::training::train;

    fn quick() -> (
        crate::data::LabeledDataset,
        TrainConfig,
        crate::training::TrainOutcome,
    ) {
        let d = generate_case1(0);
        let cfg = TrainConfig {
            epoch_max: 3,
            nhid1: 8,
            nhid2: 4,
            ..TrainConfig::default()
        };
        let out = train(&d, &cfg).unwrap();
        (d, cfg, out)
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let (_, cfg, out) = quick();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        Checkpoint::new(&cfg, &out.params).save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.params, out.params);
        assert_eq!(back.config, cfg);

        fs::write(
            &path,
            fs::read_to_string(&path)
                .unwrap()
                .replace("\"version\":1", "\"version\":9"),
        )
        .unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn embeddings_csv_matches_state() {
        let (d, _, out) = quick();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        export_embeddings(&out.state, &d.labels, &path, true).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines.len(), d.node_count() + 1);
        let h = out.state.z.cols();
        assert_eq!(lines[0].split(',').count(), 2 + 4 * h);
        for (i, line) in lines[1..].iter().enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .skip(2)
                .take(h)
                .map(|v| v.parse().unwrap())
                .collect();
            assert_eq!(vals, out.state.z.row(i));
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let (d, _, out) = quick();
        let report = AttentionReport::new(&out.history, &out.state);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_attention_csv(&report, &d.labels, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        for line in text.lines().skip(2) {
            let s: f64 = line.split(',').skip(2).map(|v| v.parse::<f64>().unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        write_history_csv(&out.history, &dir.path().join("h.csv")).unwrap();
        let h = fs::read_to_string(dir.path().join("h.csv")).unwrap();
        assert_eq!(h.lines().count(), 2 + 3);
    }
}
