//! Structural adaptation of the Bayesian network.
//!
//! At every task boundary the engine scores weights by signal-to-noise ratio
//! and re-initializes the insignificant ones, estimates how much of the
//! existing network the incoming task can reuse, grows hidden layers by the
//! remainder, and expands the output layer under the single-head protocol.
//! All operations keep the prior snapshot in lockstep with the live network
//! so the KL term never drags fresh parameters back to stale values.

mod growth;
mod head;
mod prune;
mod stats;

pub use growth::{
    estimate_pruned_neurons, grow_hidden_layers, mean_input, plan_growth_resource, plan_growth_vip,
    task_distance, GrowthLayerPlan, GrowthPlan, GrowthPolicy, InputMeanTracker,
};
pub use head::{attach_task_head_with_prior, expand_output_single_head};
pub use prune::{prune_and_reinit, snr, LayerPruneReport, PruneReport};
pub use stats::{
    estimate_shared, mean_activations, significant_fractions, weight_adaptation_stats,
    ActivationStats, AdaptationStats, BinStat, TransitionStats, ADAPTATION_BIN_LABELS,
    DEFAULT_ADAPTATION_THRESHOLDS,
};
