//! Policy/value learning from critical paths, and the statistical
//! acceptance schedule for new parameters.

mod approximator;
pub mod checkpoint;
mod dataset;
pub mod mlp;
pub mod schedule;
pub mod stats;

use thiserror::Error;

pub use approximator::{
    cross_entropy_with_logits, fit, fit_policy, fit_value, gradient_of, huber, loss_of, one_hot_pixels, softmax,
    Approximator, FitConfig, FitReport, Head, LearnedPolicy, MlpApproximator, TabularApproximator, DEFAULT_HIDDEN,
    HUBER_DELTA,
};
pub use dataset::{build_policy_batch, build_value_batch, one_hot, TrainingBatch};
pub use schedule::{acceptance_test, rejects, ScheduleDecision, ScheduleState, REJECT_BELOW};
pub use stats::{welch_t_test, StatsError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LearnError {
    #[error("no critical-path transitions to train on")]
    EmptyDataset,
    #[error("training loss became non-finite")]
    NonFiniteLoss,
    #[error("malformed training batch: {0}")]
    InvalidBatch(String),
}
