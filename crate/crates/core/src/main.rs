//! `amgcn` command-line interface.
//!
//! Exit codes: 0 success, 1 gradient check failed, 2 usage, 3 config,
//! 4 data, 5 training or checkpoint.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use amgcn::data::{
    generate_case1, generate_case2, load_dataset, load_dataset_with_report, make_split, save_dataset,
};
use amgcn::eval::{
    export_embeddings, write_attention_csv, write_history_csv, AttentionReport, AttentionSummary, Checkpoint,
    MetricsFile, MetricsReport, SetMetrics, METRICS_SCHEMA,
};
use amgcn::graph::build_knn_graph;
use amgcn::model::{full_forward, ChannelSet, ForwardOptions, Mode};
use amgcn::training::{
    finite_difference_check, parse_config_map, prepare_inputs, train, GradcheckConfig, TrainConfig, Variant,
};
use amgcn::{Error, SimilarityMetric};

const SEED_ENV: &str = "AMGCN_SEED";

#[derive(Parser)]
#[command(
    name = "amgcn",
    version,
    about = "Adaptive multi-channel GCN for node classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Case1,
    Case2,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic case-study dataset.
    Generate {
        case: Case,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on a dataset directory and write the run artifacts.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// JSON or `key = value` file with TrainConfig keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Published hyperparameters, e.g. `acm-20`; the config file overrides them.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        variant: Option<Variant>,
        /// Channels used in fusion, e.g. `tcf`, `t`, `f`.
        #[arg(long)]
        channels: Option<ChannelSet>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also write embeddings.csv with every channel's embedding.
        #[arg(long)]
        embeddings: bool,
    },
    /// Evaluate a checkpoint on a dataset; prints metrics JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Compare hand-derived gradients with central differences.
    Gradcheck {
        /// JSON or `key = value` file with GradcheckConfig keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build the kNN feature graph of a dataset and write it as an edge list.
    KnnGraph {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k: usize,
        /// `cosine`, `heat` or `heat:<t>`.
        #[arg(long, default_value = "cosine")]
        metric: SimilarityMetric,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => 3,
            Error::Data(_) | Error::InvalidInput(_) | Error::DimensionMismatch { .. } => 4,
            Error::Io(_) => 4,
            Error::NonFiniteLoss { .. } | Error::MissingCache(_) | Error::Checkpoint(_) => 5,
        };
        let message = match &e {
            Error::Data(d) => format!("data error [{}]: {d}", d.code()),
            _ => e.to_string(),
        };
        Self { code, message }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::new(3, format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn read_config_map(path: &Path) -> CliResult<Map<String, Value>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(3, format!("cannot read config {}: {e}", path.display())))?;
    Ok(parse_config_map(&text)?)
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(4, format!("{}: {e}", path.display()))
}

fn generate(case: Case, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let seed = match seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let dataset = match case {
        Case::Case1 => generate_case1(seed),
        Case::Case2 => generate_case2(seed),
    };
    save_dataset(&dataset, out)?;
    println!(
        "wrote {} nodes, {} edges, {} features to {}",
        dataset.node_count(),
        dataset.graph.edge_count(),
        dataset.feature_dim(),
        out.display()
    );
    Ok(())
}

/// Preset or defaults, then the config file, then flags. The seed falls back
/// to `AMGCN_SEED` when neither the flag nor the file sets it.
fn resolve_train_config(
    config: Option<&Path>,
    preset: Option<&str>,
    overrides: Map<String, Value>,
) -> CliResult<TrainConfig> {
    let base = match preset {
        Some(name) => TrainConfig::preset(name)?,
        None => TrainConfig::default(),
    };
    let mut layered = match config {
        Some(path) => read_config_map(path)?,
        None => Map::new(),
    };
    if !layered.contains_key("seed") && !overrides.contains_key("seed") {
        if let Some(s) = env_seed()? {
            layered.insert("seed".into(), Value::from(s));
        }
    }
    layered.extend(overrides);
    Ok(base.with_overrides(layered)?)
}

#[allow(clippy::too_many_arguments)]
fn train_command(
    data: &Path,
    config: Option<&Path>,
    preset: Option<&str>,
    variant: Option<Variant>,
    channels: Option<ChannelSet>,
    epochs: Option<usize>,
    seed: Option<u64>,
    out: &Path,
    embeddings: bool,
) -> CliResult<()> {
    let mut flags = Map::new();
    if let Some(v) = variant {
        flags.insert("variant".into(), Value::from(v.to_string()));
    }
    if let Some(c) = channels {
        flags.insert("channels".into(), Value::from(c.to_string()));
    }
    if let Some(e) = epochs {
        flags.insert("epoch_max".into(), Value::from(e));
    }
    if let Some(s) = seed {
        flags.insert("seed".into(), Value::from(s));
    }
    let cfg = resolve_train_config(config, preset, flags)?;

    let (mut dataset, report) = load_dataset_with_report(data)?;
    for w in report.warnings() {
        eprintln!("warning: {w}");
    }
    if !dataset.has_split() {
        let available = dataset
            .node_count()
            .saturating_sub(cfg.labels_per_class * dataset.num_classes);
        let test_size = cfg.test_size.min(available);
        if test_size < cfg.test_size {
            eprintln!("warning: only {test_size} nodes left for the test set");
        }
        let split = make_split(
            &dataset.labels,
            dataset.num_classes,
            cfg.labels_per_class,
            test_size,
            cfg.seed,
        )
        .map_err(Error::from)?;
        dataset.set_split(split);
    }

    let outcome = train(&dataset, &cfg)?;
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let pred = outcome.predictions();
    let set = |idx: &[usize]| -> CliResult<Option<SetMetrics>> {
        if idx.is_empty() {
            return Ok(None);
        }
        Ok(Some(SetMetrics {
            size: idx.len(),
            report: MetricsReport::compute(&pred, &dataset.labels, idx, dataset.num_classes)?,
        }))
    };
    let attention = AttentionReport::new(&outcome.history, &outcome.state);
    let metrics = MetricsFile {
        schema_version: METRICS_SCHEMA,
        variant: cfg.variant.to_string(),
        channels: cfg.channels.to_string(),
        seed: cfg.seed,
        epochs: cfg.epoch_max,
        train: set(&dataset.train_idx)?,
        test: set(&dataset.test_idx)?,
        final_loss: outcome.history.epochs.last().map(|r| r.loss),
        attention: AttentionSummary::from(&attention),
    };
    Checkpoint::new(&cfg, &outcome.params).save(&out.join("checkpoint.json"))?;
    metrics.write(&out.join("metrics.json"))?;
    write_history_csv(&outcome.history, &out.join("history.csv"))?;
    write_attention_csv(&attention, &dataset.labels, &out.join("attention.csv"))?;
    if embeddings {
        export_embeddings(&outcome.state, &dataset.labels, &out.join("embeddings.csv"), true)?;
    }
    println!(
        "train acc {:.4}  test acc {:.4}  test macro-F1 {:.4}",
        outcome.train_accuracy,
        outcome.test_accuracy,
        metrics.test.as_ref().map_or(0.0, |m| m.report.macro_f1)
    );
    println!("{}", attention.verdict());
    Ok(())
}

fn eval_command(checkpoint: &Path, data: &Path) -> CliResult<()> {
    let ck = Checkpoint::load(checkpoint).map_err(|e| match e {
        Error::Io(io) => Failure::new(5, format!("{}: {io}", checkpoint.display())),
        other => other.into(),
    })?;
    let dataset = load_dataset(data)?;
    if ck.params.dims().input != dataset.feature_dim() || ck.params.dims().classes != dataset.num_classes {
        return Err(Failure::new(
            4,
            format!(
                "checkpoint expects {} features and {} classes, dataset has {} and {}",
                ck.params.dims().input,
                ck.params.dims().classes,
                dataset.feature_dim(),
                dataset.num_classes
            ),
        ));
    }
    let inputs = prepare_inputs(&dataset, &ck.config)?;
    let options = ForwardOptions {
        dropout: 0.0,
        active: ck.config.channels,
    };
    let state = full_forward(&inputs, &ck.params, options, Mode::Eval)?;
    let pred = state.predictions();
    let idx: Vec<usize> = if dataset.test_idx.is_empty() {
        (0..dataset.node_count()).collect()
    } else {
        dataset.test_idx.clone()
    };
    let report = SetMetrics {
        size: idx.len(),
        report: MetricsReport::compute(&pred, &dataset.labels, &idx, dataset.num_classes)?,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("metrics serialize")
    );
    Ok(())
}

fn gradcheck_command(config: Option<&Path>, seed: Option<u64>) -> CliResult<bool> {
    let mut map = match config {
        Some(path) => read_config_map(path)?,
        None => Map::new(),
    };
    match seed {
        Some(s) => {
            map.insert("seed".into(), Value::from(s));
        }
        None if !map.contains_key("seed") => {
            if let Some(s) = env_seed()? {
                map.insert("seed".into(), Value::from(s));
            }
        }
        None => {}
    }
    let cfg: GradcheckConfig = serde_json::from_value(Value::Object(map))
        .map_err(|e| Failure::new(3, format!("invalid config: {e}")))?;
    let report = finite_difference_check(&cfg)?;
    println!("{:<16} {:>14} {:>14}  status", "tensor", "max abs err", "rel err");
    for t in &report.tensors {
        println!(
            "{:<16} {:>14.3e} {:>14.3e}  {}",
            t.name,
            t.max_abs_error,
            t.relative_error,
            if t.passed { "ok" } else { "FAIL" }
        );
    }
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    println!(
        "{verdict}: max relative error {:.3e} (tolerance {:.0e}, seed {})",
        report.max_relative_error(),
        report.tolerance,
        cfg.seed
    );
    if !report.passed() {
        eprintln!("gradient check failed for: {}", report.failures().join(", "));
    }
    Ok(report.passed())
}

fn knn_command(data: &Path, k: usize, metric: SimilarityMetric, out: &Path) -> CliResult<()> {
    let dataset = load_dataset(data)?;
    let graph = build_knn_graph(&dataset.x, k, metric)?;
    let file = fs::File::create(out).map_err(|e| io_failure(out, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(w, "# amgcn knn-graph k={k} metric={metric}")?;
        for (i, j) in graph.edges() {
            writeln!(w, "{i}\t{j}")?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| io_failure(out, e))?;
    println!("wrote {} edges to {}", graph.edge_count(), out.display());
    Ok(())
}

fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Generate { case, seed, out } => generate(case, seed, &out)?,
        Command::Train {
            data,
            config,
            preset,
            variant,
            channels,
            epochs,
            seed,
            out,
            embeddings,
        } => train_command(
            &data,
            config.as_deref(),
            preset.as_deref(),
            variant,
            channels,
            epochs,
            seed,
            &out,
            embeddings,
        )?,
        Command::Eval { checkpoint, data } => eval_command(&checkpoint, &data)?,
        Command::Gradcheck { config, seed } => {
            if !gradcheck_command(config.as_deref(), seed)? {
                return Ok(1);
            }
        }
        Command::KnnGraph { data, k, metric, out } => knn_command(&data, k, metric, &out)?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
