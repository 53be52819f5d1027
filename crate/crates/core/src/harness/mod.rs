//! Experiment configuration, orchestration and reporting.

mod config;
mod output;
mod pipeline;
mod plot;
mod pretrain;
mod report;
mod stream;
mod sweep;

pub use config::{
    AxisConfig, CellConfig, DatasetConfig, DatasetKind, ExperimentConfig, StreamConfig, SweepConfig,
};
pub use pipeline::{
    adapt_split, generate_domains, make_split, prepare, preparation_key, run_prepared, run_single,
    score_source_model, Domains, FeedbackSplit, FinalMetrics, PretrainSummary, Prepared, RunOutput,
    RunRecord,
};
pub use output::{ensure_dir, read_text, slug, write_json, write_jsonl, write_text};
pub use plot::{decision_panels, Panel, PLOT_RESOLUTION};
pub use pretrain::{pretrain, PretrainConfig};
pub use report::{
    aggregate, format_table, mean_std, read_aggregate_csv, read_records, write_aggregate_csv, AggregateRow,
};
pub use stream::{checkpoint_items, run_stream, CheckpointRecord, FifoMemory, StreamOutcome};
pub use sweep::{ablation_cells, default_threads, expand_axes, run_cells, Ablation, Cell};
