//! Orchestration of the continual-learning pipeline: per-task training with
//! posterior-as-prior regularization, coreset rehearsal, single-head and
//! multi-head protocols, and evaluation metrics.

mod config;
mod coreset;
mod metrics;
mod runner;

pub use config::{GrowthSetting, OptimizerChoice, ScenarioConfig};
pub use coreset::{split_train_coreset, Coreset, TaskCoreset};
pub use metrics::{forgetting_curves, AccuracyMatrix, ForgettingReport};
pub use runner::{
    evaluate, materialize_coresets, replay_coreset, run_continual, train_task, ReplayScope,
    RunOutcome, TaskOutcome, TrainReport,
};
