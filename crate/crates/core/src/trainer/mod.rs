//! Adversarial training on synthetic densities with online monitoring of the
//! likelihood ratio recovered from the discriminator.

mod config;
mod metrics;
mod train;

pub use config::{DataSource, TrainConfig, DEFAULT_HIDDEN};
pub use metrics::{
    final_window_lr, format_metrics, likelihood_ratio_metric, mmd_rbf, mode_coverage,
    parse_metrics, ratio_estimates, sliced_wasserstein, wasserstein_1d, Bandwidth, MetricRecord,
    RatioStats, METRIC_COLUMNS,
};
pub use train::{
    column_moments, fit_identity, gradient_penalty, train, train_with, Checkpoint, Snapshot,
    TrainOutcome,
};
