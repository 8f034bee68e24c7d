//! Classification metrics and source-contribution analyses.

mod metrics;
mod studies;

pub use metrics::{percent, ConfusionMatrix, MetricsBundle, MetricsError, Quantity, Undefined};
pub use studies::{
    balancing_comparison, correct_source_histogram, loco_by_source, single_source_ablation,
    BalancingOutcome, LocoDelta, Method, SourceHistogram,
};
