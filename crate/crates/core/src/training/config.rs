//! Training configuration, ablation variants and the published per-dataset
//! hyperparameters.
//!
//! Config files are either JSON objects or flat `key = value` lines; keys are
//! the field names of [`TrainConfig`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::graph::SimilarityMetric;
use crate::losses::LossWeights;
use crate::model::ChannelSet;

/// Which constraint terms stay in the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Both constraints.
    #[default]
    Full,
    /// No constraints (`γ = β = 0`).
    #[serde(alias = "w/o")]
    Wo,
    /// Consistency only (`β = 0`).
    C,
    /// Disparity only (`γ = 0`).
    D,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::Wo, Variant::C, Variant::D];

    pub fn apply(self, weights: LossWeights) -> LossWeights {
        match self {
            Variant::Full => weights,
            Variant::Wo => LossWeights {
                gamma: 0.0,
                beta: 0.0,
            },
            Variant::C => LossWeights { beta: 0.0, ..weights },
            Variant::D => LossWeights {
                gamma: 0.0,
                ..weights
            },
        }
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Variant::Full),
            "wo" | "w/o" => Ok(Variant::Wo),
            "c" => Ok(Variant::C),
            "d" => Ok(Variant::D),
            other => Err(Error::Config(format!(
                "unknown variant '{other}' (expected full, wo, c or d)"
            ))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Full => "full",
            Variant::Wo => "wo",
            Variant::C => "c",
            Variant::D => "d",
        })
    }
}

/// Which weight matrices receive weight decay. Biases never do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayScope {
    /// Every weight matrix, attention and classifier included.
    #[default]
    All,
    /// Only the GCN channel weights.
    Gcn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub nhid1: usize,
    pub nhid2: usize,
    /// Attention hidden width; `None` means `nhid2`.
    pub attn_hidden: Option<usize>,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub weight_decay_scope: DecayScope,
    pub epoch_max: usize,
    /// Neighbours per node in the feature graph.
    pub k: usize,
    pub metric: SimilarityMetric,
    pub gamma: f64,
    pub beta: f64,
    pub seed: u64,
    pub variant: Variant,
    /// Average the cross-entropy over training nodes instead of summing.
    pub ce_mean: bool,
    pub attn_per_channel: bool,
    /// Channels taking part in fusion; anything but `tcf` is an ablation.
    pub channels: ChannelSet,
    /// Used only when the dataset ships without a split.
    pub labels_per_class: usize,
    pub test_size: usize,
}

/// Desk-scale defaults used for the synthetic case studies.
impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            nhid1: 32,
            nhid2: 16,
            attn_hidden: None,
            dropout: 0.5,
            lr: 0.005,
            weight_decay: 5e-4,
            weight_decay_scope: DecayScope::All,
            epoch_max: 100,
            k: 7,
            metric: SimilarityMetric::Cosine,
            gamma: 0.001,
            beta: 5e-8,
            seed: 0,
            variant: Variant::Full,
            ce_mean: false,
            attn_per_channel: false,
            channels: ChannelSet::ALL,
            labels_per_class: 20,
            test_size: 1000,
        }
    }
}

/// One row of the published hyperparameter table:
/// `(dataset, L/C, nhid1, nhid2, dropout, lr, weight decay, epochs, k, γ, β)`.
type PresetRow = (
    &'static str,
    usize,
    usize,
    usize,
    f64,
    f64,
    f64,
    usize,
    usize,
    f64,
    f64,
);

const PRESETS: &[PresetRow] = &[
    ("citeseer", 20, 768, 256, 0.5, 0.0005, 5e-3, 25, 7, 0.001, 5e-10),
    ("citeseer", 40, 768, 128, 0.5, 0.0005, 5e-3, 25, 7, 0.001, 5e-8),
    ("citeseer", 60, 768, 128, 0.5, 0.0005, 5e-3, 25, 7, 0.001, 5e-8),
    ("uai2010", 20, 512, 128, 0.5, 0.0005, 5e-4, 50, 5, 0.001, 1e-9),
    ("uai2010", 40, 512, 128, 0.5, 0.0005, 5e-4, 70, 5, 0.01, 1e-9),
    ("uai2010", 60, 512, 128, 0.5, 0.0005, 1e-5, 70, 5, 0.01, 1e-9),
    ("acm", 20, 768, 256, 0.5, 0.0005, 5e-4, 20, 5, 0.001, 1e-8),
    ("acm", 40, 768, 256, 0.5, 0.0005, 5e-4, 20, 5, 0.001, 1e-8),
    ("acm", 60, 768, 256, 0.5, 0.0001, 6e-4, 30, 5, 0.001, 1e-8),
    ("blogcatalog", 20, 512, 128, 0.5, 0.0002, 1e-5, 55, 5, 0.001, 5e-8),
    ("blogcatalog", 40, 512, 128, 0.5, 0.0005, 5e-4, 40, 5, 0.001, 5e-8),
    ("blogcatalog", 60, 512, 128, 0.5, 0.0005, 8e-4, 50, 5, 0.01, 5e-8),
    ("flickr", 20, 512, 128, 0.5, 0.0003, 5e-4, 60, 5, 0.01, 1e-10),
    ("flickr", 40, 512, 128, 0.5, 0.0005, 1e-5, 40, 5, 0.01, 1e-10),
    ("flickr", 60, 512, 128, 0.5, 0.0005, 5e-4, 40, 5, 0.01, 1e-10),
    ("corafull", 20, 512, 32, 0.5, 0.001, 5e-4, 300, 6, 0.0001, 1e-10),
    ("corafull", 40, 512, 32, 0.5, 0.001, 5e-4, 300, 6, 0.00001, 1e-10),
    ("corafull", 60, 512, 32, 0.5, 0.001, 5e-4, 300, 6, 0.0001, 1e-10),
];

impl TrainConfig {
    /// Published hyperparameters for `name` written as `<dataset>-<L/C>`,
    /// e.g. `acm-20`. `synthetic` gives the defaults.
    pub fn preset(name: &str) -> Result<Self> {
        let name = name.trim().to_ascii_lowercase();
        if name == "synthetic" {
            return Ok(Self::default());
        }
        let (dataset, rate) = name
            .rsplit_once('-')
            .and_then(|(d, r)| Some((d, r.parse::<usize>().ok()?)))
            .ok_or_else(|| Error::Config(format!("preset '{name}' is not of the form <dataset>-<L/C>")))?;
        let row = PRESETS
            .iter()
            .find(|r| r.0 == dataset && r.1 == rate)
            .ok_or_else(|| Error::Config(format!("no published hyperparameters for '{name}'")))?;
        let &(_, lc, nhid1, nhid2, dropout, lr, weight_decay, epoch_max, k, gamma, beta) = row;
        Ok(Self {
            nhid1,
            nhid2,
            dropout,
            lr,
            weight_decay,
            epoch_max,
            k,
            gamma,
            beta,
            labels_per_class: lc,
            ..Self::default()
        })
    }

    pub fn preset_names() -> Vec<String> {
        PRESETS.iter().map(|r| format!("{}-{}", r.0, r.1)).collect()
    }

    pub fn attn_hidden(&self) -> usize {
        self.attn_hidden.unwrap_or(self.nhid2)
    }

    /// `γ, β` after the variant has zeroed its terms.
    pub fn loss_weights(&self) -> LossWeights {
        self.variant.apply(LossWeights {
            gamma: self.gamma,
            beta: self.beta,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("nhid1", self.nhid1)?;
        positive("nhid2", self.nhid2)?;
        positive("attn_hidden", self.attn_hidden())?;
        positive("k", self.k)?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        LossWeights::new(self.gamma, self.beta).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Parses a config file: a JSON object, or `key = value` lines with `#`
    /// comments.
    pub fn parse(text: &str) -> Result<Self> {
        let map = parse_config_map(text)?;
        Self::from_map(map)
    }

    /// Overlays `overrides` on top of `self`.
    pub fn with_overrides(&self, overrides: Map<String, Value>) -> Result<Self> {
        let mut base = match serde_json::to_value(self) {
            Ok(Value::Object(m)) => m,
            _ => unreachable!("config always serializes to an object"),
        };
        base.extend(overrides);
        Self::from_map(base)
    }

    fn from_map(map: Map<String, Value>) -> Result<Self> {
        let config: Self =
            serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

/// Reads either config syntax into a JSON object.
pub fn parse_config_map(text: &str) -> Result<Map<String, Value>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        return match serde_json::from_str(trimmed) {
            Ok(Value::Object(m)) => Ok(m),
            Ok(_) => Err(Error::Config("config JSON must be an object".into())),
            Err(e) => Err(Error::Config(format!("config JSON: {e}"))),
        };
    }
    let mut map = Map::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        map.insert(key.trim().to_string(), scalar_value(value.trim()));
    }
    Ok(map)
}

/// Interprets a bare config value as integer, float, bool, null or string.
pub fn scalar_value(raw: &str) -> Value {
    let unquoted = raw
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .map(str::to_string);
    if let Some(s) = unquoted {
        return Value::String(s);
    }
    if let Ok(i) = raw.parse::<u64>() {
        return Value::from(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        if f.is_finite() {
            return Value::from(f);
        }
    }
    match raw {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        "null" | "none" => Value::Null,
        _ => Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acm_preset_matches_table() {
        let c = TrainConfig::preset("ACM-20").unwrap();
        assert_eq!((c.nhid1, c.nhid2, c.k, c.epoch_max), (768, 256, 5, 20));
        assert_eq!(
            (c.lr, c.weight_decay, c.gamma, c.beta),
            (0.0005, 5e-4, 0.001, 1e-8)
        );
        assert!(TrainConfig::preset("acm-30").is_err());
        assert_eq!(TrainConfig::preset_names().len(), 18);
    }

    #[test]
    fn variants_zero_their_terms() {
        let w = LossWeights {
            gamma: 0.1,
            beta: 0.2,
        };
        assert_eq!(
            Variant::Wo.apply(w),
            LossWeights {
                gamma: 0.0,
                beta: 0.0
            }
        );
        assert_eq!(
            Variant::C.apply(w),
            LossWeights {
                gamma: 0.1,
                beta: 0.0
            }
        );
        assert_eq!(
            Variant::D.apply(w),
            LossWeights {
                gamma: 0.0,
                beta: 0.2
            }
        );
        assert_eq!("w/o".parse::<Variant>().unwrap(), Variant::Wo);
    }

    #[test]
    fn both_file_syntaxes() {
        let kv = "# comment\nnhid1 = 16\nlr=0.01\nmetric = heat:2\nvariant = c\nchannels = \"tf\"\nattn_hidden = 8\n";
        let a = TrainConfig::parse(kv).unwrap();
        assert_eq!(a.nhid1, 16);
        assert_eq!(a.lr, 0.01);
        assert_eq!(a.metric, SimilarityMetric::heat());
        assert_eq!(a.variant, Variant::C);
        assert_eq!(a.channels.to_string(), "tf");
        assert_eq!(a.attn_hidden(), 8);

        let js = r#"{"nhid1": 16, "lr": 0.01, "metric": "heat:2", "variant": "c", "channels": "tf", "attn_hidden": 8}"#;
        assert_eq!(TrainConfig::parse(js).unwrap(), a);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(TrainConfig::parse("bogus = 1").is_err());
        assert!(TrainConfig::parse("dropout = 1.0").is_err());
        assert!(TrainConfig::parse("lr = -1").is_err());
        assert!(TrainConfig::parse("gamma = -0.1").is_err());
        assert!(TrainConfig::parse("nhid1 16").is_err());
        assert!(TrainConfig::parse("[1, 2]").is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = TrainConfig::preset("corafull-40").unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(TrainConfig::parse(&s).unwrap(), c);
    }
}
