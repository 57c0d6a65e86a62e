//! Scenario configuration.

use alloc::vec;
use alloc::vec::Vec;

use crate::bnn::HeadMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthSetting {
    /// Per-layer resource accounting: required minus shared minus freed.
    ResourceAccounting,
    /// Uniform growth scaled by task distance and pruned fraction.
    VipScaled,
    /// No growth (ablation).
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerChoice {
    Sgd,
    Adam,
}

/// Everything one continual run needs. Field defaults are documented
/// conventional values; the hyperparameters that matter per scenario
/// (`beta`, `gamma`, coreset size, hidden sizes) come from presets.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub head_mode: HeadMode,
    pub growth: GrowthSetting,
    pub pruning_enabled: bool,
    /// SNR threshold for pruning.
    pub beta: f64,
    /// Activation-distance threshold for shared-representation estimation.
    pub gamma: f64,
    /// Scale of the distance-based growth policy.
    pub kappa: f64,
    pub coreset_size_per_task: usize,
    pub rho_init: f64,
    pub mu_std: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Coreset replay epochs; `None` means the main epoch count.
    pub replay_epochs: Option<usize>,
    /// Epochs of the per-task coreset fine-tune during multi-head evaluation.
    pub eval_finetune_epochs: usize,
    pub batch_size: usize,
    /// MC samples per training loss evaluation.
    pub mc_train: usize,
    /// MC samples averaged at prediction time.
    pub mc_eval: usize,
    pub seed: u64,
    /// Initial hidden layer widths; also the default `alpha_req`.
    pub hidden_sizes: Vec<usize>,
    pub optimizer: OptimizerChoice,
    /// Per-layer required-capacity override; `None` uses the initial widths.
    pub alpha_req: Option<Vec<usize>>,
    /// Serializes seed execution in the CLI. The core engine is
    /// single-threaded and bit-reproducible either way.
    pub deterministic: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            head_mode: HeadMode::Single,
            growth: GrowthSetting::ResourceAccounting,
            pruning_enabled: true,
            beta: libm::exp(-5.0),
            gamma: 0.2,
            kappa: 1.0,
            coreset_size_per_task: 40,
            rho_init: -6.0,
            mu_std: 0.1,
            lr: 1e-3,
            epochs: 20,
            replay_epochs: None,
            eval_finetune_epochs: 5,
            batch_size: 128,
            mc_train: 1,
            mc_eval: 10,
            seed: 1,
            hidden_sizes: vec![64, 64],
            optimizer: OptimizerChoice::Adam,
            alpha_req: None,
            deterministic: true,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidConfig("beta must be >= 0"));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidConfig("gamma must be >= 0"));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::InvalidConfig("kappa must be >= 0"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig("lr must be positive"));
        }
        if !(self.mu_std >= 0.0 && self.mu_std.is_finite()) {
            return Err(Error::InvalidConfig("mu_std must be non-negative"));
        }
        if !self.rho_init.is_finite() {
            return Err(Error::InvalidConfig("rho_init must be finite"));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1"));
        }
        if self.mc_train == 0 || self.mc_eval == 0 {
            return Err(Error::InvalidConfig("mc_train and mc_eval must be >= 1"));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig("hidden sizes must be positive"));
        }
        if let Some(req) = &self.alpha_req {
            if req.len() != self.hidden_sizes.len() {
                return Err(Error::InvalidConfig(
                    "alpha_req must have one entry per hidden layer",
                ));
            }
        }
        Ok(())
    }

    pub fn replay_epochs_or_default(&self) -> usize {
        self.replay_epochs.unwrap_or(self.epochs)
    }
}
