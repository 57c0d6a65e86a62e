//! SNR scoring and pruning by re-initialization.

use alloc::vec::Vec;

use libm::{exp, fabs};

use crate::bnn::{GaussianParam, InitConfig, PosteriorSnapshot, VariationalNetwork};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Elementwise significance score `|mu| / sigma` with `sigma = exp(0.5 rho)`.
pub fn snr(param: &GaussianParam) -> Matrix {
    let mut out = param.mu.clone();
    for (v, &r) in out.data_mut().iter_mut().zip(param.rho.data()) {
        *v = fabs(*v) * exp(-0.5 * r);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerPruneReport {
    /// Number of re-initialized connections (`delta_k`).
    pub delta: usize,
    /// Row-major mask over the layer's weight matrix; `true` = re-initialized.
    pub mask: Vec<bool>,
    /// Total weight count of the layer when pruned.
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneReport {
    pub beta: f64,
    pub layers: Vec<LayerPruneReport>,
}

impl PruneReport {
    pub fn delta_per_layer(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.delta).collect()
    }

    pub fn total_delta(&self) -> usize {
        self.layers.iter().map(|l| l.delta).sum()
    }

    pub fn total_weights(&self) -> usize {
        self.layers.iter().map(|l| l.total).sum()
    }

    /// Fraction of hidden weights that were re-initialized.
    pub fn pruned_fraction(&self) -> f64 {
        let total = self.total_weights();
        if total == 0 {
            0.0
        } else {
            self.total_delta() as f64 / total as f64
        }
    }
}

/// Re-initializes every hidden-layer weight whose SNR falls below `beta` and
/// resets the matching prior entries to the fresh-init prior (`mu = 0`,
/// `rho = rho_init`), so the KL term does not pull the fresh weights back to
/// their stale posterior. Biases and output heads are exempt: only
/// inter-neuron connections carry the SNR significance semantics.
pub fn prune_and_reinit(
    net: &mut VariationalNetwork,
    prior: &mut PosteriorSnapshot,
    beta: f64,
    init: &InitConfig,
    rng: &mut Rng,
) -> Result<PruneReport> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidConfig("beta must be >= 0"));
    }
    if prior.network().hidden().len() != net.hidden().len() {
        return Err(Error::PlanLayerMismatch {
            plan_layers: prior.network().hidden().len(),
            net_layers: net.hidden().len(),
        });
    }

    let mut layers = Vec::with_capacity(net.hidden().len());
    for (layer, prior_layer) in net
        .hidden_mut()
        .iter_mut()
        .zip(prior.network_mut().hidden_mut())
    {
        if layer.weights.shape() != prior_layer.weights.shape() {
            return Err(Error::ShapeMismatch {
                op: "prune prior",
                left: layer.weights.shape(),
                right: prior_layer.weights.shape(),
            });
        }
        let scores = snr(&layer.weights);
        let total = scores.len();
        let mut mask = Vec::with_capacity(total);
        let mut delta = 0;
        for i in 0..total {
            let pruned = scores.data()[i] < beta;
            mask.push(pruned);
            if pruned {
                delta += 1;
                layer.weights.mu.data_mut()[i] = init.mu_std * rng.normal();
                layer.weights.rho.data_mut()[i] = init.rho_init;
                prior_layer.weights.mu.data_mut()[i] = 0.0;
                prior_layer.weights.rho.data_mut()[i] = init.rho_init;
            }
        }
        layers.push(LayerPruneReport { delta, mask, total });
    }
    Ok(PruneReport { beta, layers })
}
