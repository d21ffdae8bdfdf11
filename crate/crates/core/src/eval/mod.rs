//! Metrics, attention analysis and run artifacts.

mod attention;
mod metrics;
mod reports;

pub use attention::AttentionReport;
pub use metrics::{accuracy, macro_f1, ClassMetrics, MetricsReport};
pub use reports::{
    export_embeddings, write_attention_csv, write_history_csv, AttentionSummary, Checkpoint, MetricsFile,
    SetMetrics, ATTENTION_SCHEMA, CHECKPOINT_VERSION, EMBEDDINGS_SCHEMA, HISTORY_SCHEMA, METRICS_SCHEMA,
};
