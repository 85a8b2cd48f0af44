mod experiment;
mod metrics;

pub use experiment::{
    evaluate, node_auc, run_experiment, run_experiment_with, DatasetId, ExperimentSpec, MetricsReport, ModelKind,
    RunRecord, SummaryRow, TaskData, TaskPreset,
};
pub use metrics::{macro_auc, roc_auc, MacroAuc};
