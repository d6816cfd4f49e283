//! Training, evaluation, attention reports and multi-seed aggregation.

mod config;
mod data;
mod eval;
mod optim;
mod train;

pub use config::RunConfig;
pub use data::{documents, preprocess_records, synthetic_dataset, token_lists, Dataset};
pub use eval::{
    aggregate, attend, evaluate, intensities, read_report, score_matrix, write_report,
    trigger_fidelity, AttentionReport, MetricSummary, SeedReport, TriggerFidelity,
};
pub use optim::Adam;
pub use train::{batch_gradients, label_stats, objective, train, EpochRecord, TrainOutcome};
