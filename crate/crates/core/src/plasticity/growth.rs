//! Growth planning and hidden-layer expansion.

use alloc::vec;
use alloc::vec::Vec;

use libm::{round, sqrt};

use crate::bnn::{GaussianParam, InitConfig, PosteriorSnapshot, VariationalNetwork};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthPolicy {
    /// `alpha = max(0, alpha_req - (alpha_share + alpha_prune))` per layer.
    ResourceAccounting,
    /// `eta = round(kappa * phi_d * phi_s)` applied uniformly to every layer.
    VipScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowthLayerPlan {
    pub alpha_req: usize,
    pub alpha_share: usize,
    pub alpha_prune: usize,
    /// Neurons to add.
    pub alpha: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthPlan {
    pub policy: GrowthPolicy,
    pub layers: Vec<GrowthLayerPlan>,
}

impl GrowthPlan {
    pub fn alphas(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.alpha).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|l| l.alpha == 0)
    }
}

/// Required minus covered capacity, clamped at zero per layer.
pub fn plan_growth_resource(
    alpha_req: &[usize],
    alpha_share: &[usize],
    alpha_prune: &[usize],
) -> Result<GrowthPlan> {
    if alpha_req.len() != alpha_share.len() || alpha_req.len() != alpha_prune.len() {
        return Err(Error::PlanLayerMismatch {
            plan_layers: alpha_share.len().max(alpha_prune.len()),
            net_layers: alpha_req.len(),
        });
    }
    let layers = alpha_req
        .iter()
        .zip(alpha_share)
        .zip(alpha_prune)
        .map(|((&req, &share), &prune)| GrowthLayerPlan {
            alpha_req: req,
            alpha_share: share,
            alpha_prune: prune,
            alpha: req.saturating_sub(share + prune),
        })
        .collect();
    Ok(GrowthPlan {
        policy: GrowthPolicy::ResourceAccounting,
        layers,
    })
}

/// Freed capacity expressed as whole-neuron equivalents:
/// `floor(delta_k / fan_in)`, proportionality constant fixed at 1.
pub fn estimate_pruned_neurons(delta: usize, fan_in: usize) -> usize {
    debug_assert!(fan_in >= 1);
    if fan_in == 0 {
        return 0;
    }
    delta / fan_in
}

/// Euclidean distance between the mean input of the incoming task and the
/// running mean input of all previous tasks.
pub fn task_distance(current_mean: &[f64], previous_mean: &[f64]) -> Result<f64> {
    if current_mean.len() != previous_mean.len() {
        return Err(Error::VectorDimMismatch {
            left: current_mean.len(),
            right: previous_mean.len(),
        });
    }
    let mut sum = 0.0;
    for (a, b) in current_mean.iter().zip(previous_mean) {
        let d = a - b;
        sum += d * d;
    }
    Ok(sqrt(sum))
}

/// Running mean over every input row seen so far; feeds `task_distance`.
#[derive(Debug, Clone)]
pub struct InputMeanTracker {
    sum: Vec<f64>,
    count: usize,
}

impl InputMeanTracker {
    pub fn new(dim: usize) -> InputMeanTracker {
        InputMeanTracker {
            sum: vec![0.0; dim],
            count: 0,
        }
    }

    pub fn add_rows(&mut self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.sum.len() {
            return Err(Error::VectorDimMismatch {
                left: inputs.cols(),
                right: self.sum.len(),
            });
        }
        for r in 0..inputs.rows() {
            for (s, &v) in self.sum.iter_mut().zip(inputs.row(r)) {
                *s += v;
            }
        }
        self.count += inputs.rows();
        Ok(())
    }

    /// `None` until at least one row has been added.
    pub fn mean(&self) -> Option<Vec<f64>> {
        if self.count == 0 {
            return None;
        }
        let scale = 1.0 / self.count as f64;
        Some(self.sum.iter().map(|s| s * scale).collect())
    }
}

/// Column mean of a matrix; the "mean representation" of a task's inputs.
pub fn mean_input(inputs: &Matrix) -> Result<Vec<f64>> {
    if inputs.rows() == 0 {
        return Err(Error::EmptyInput("mean_input"));
    }
    let mut sums = inputs.column_sums();
    let scale = 1.0 / inputs.rows() as f64;
    for s in &mut sums {
        *s *= scale;
    }
    Ok(sums)
}

/// `eta = round(kappa * phi_d * phi_s)` neurons for every hidden layer.
pub fn plan_growth_vip(
    kappa: f64,
    phi_d: f64,
    phi_s: f64,
    n_layers: usize,
) -> Result<GrowthPlan> {
    if !(kappa >= 0.0) || !(phi_d >= 0.0) || !(phi_s >= 0.0) {
        return Err(Error::InvalidConfig(
            "kappa, phi_d and phi_s must be non-negative",
        ));
    }
    let eta = round(kappa * phi_d * phi_s) as usize;
    Ok(GrowthPlan {
        policy: GrowthPolicy::VipScaled,
        layers: vec![
            GrowthLayerPlan {
                alpha_req: 0,
                alpha_share: 0,
                alpha_prune: 0,
                alpha: eta,
            };
            n_layers
        ],
    })
}

fn extend_rows(
    param: &GaussianParam,
    add: usize,
    rho_init: f64,
    mut mu_value: impl FnMut() -> f64,
) -> GaussianParam {
    let (rows, cols) = param.shape();
    let mut mu = param.mu.data().to_vec();
    let mut rho = param.rho.data().to_vec();
    for _ in 0..add * cols {
        mu.push(mu_value());
        rho.push(rho_init);
    }
    GaussianParam {
        mu: Matrix::from_vec(rows + add, cols, mu).expect("extend_rows"),
        rho: Matrix::from_vec(rows + add, cols, rho).expect("extend_rows"),
    }
}

fn extend_cols(
    param: &GaussianParam,
    add: usize,
    rho_init: f64,
    mut mu_value: impl FnMut() -> f64,
) -> GaussianParam {
    let (rows, cols) = param.shape();
    let mut mu = Vec::with_capacity(rows * (cols + add));
    let mut rho = Vec::with_capacity(rows * (cols + add));
    for r in 0..rows {
        mu.extend_from_slice(param.mu.row(r));
        rho.extend_from_slice(param.rho.row(r));
        for _ in 0..add {
            mu.push(mu_value());
            rho.push(rho_init);
        }
    }
    GaussianParam {
        mu: Matrix::from_vec(rows, cols + add, mu).expect("extend_cols"),
        rho: Matrix::from_vec(rows, cols + add, rho).expect("extend_cols"),
    }
}

/// Adds `plan.layers[k].alpha` neurons to hidden layer `k`: new rows in layer
/// `k`'s weights and biases, new columns in the consumer layer (the next
/// hidden layer, or every output head after the last). New parameters draw
/// `mu ~ N(0, mu_std^2)` with `rho = rho_init`; the prior snapshot is extended
/// at the same positions with the fresh-init prior (`mu = 0`). Pre-existing
/// parameters are untouched.
pub fn grow_hidden_layers(
    net: &mut VariationalNetwork,
    prior: &mut PosteriorSnapshot,
    plan: &GrowthPlan,
    init: &InitConfig,
    rng: &mut Rng,
) -> Result<()> {
    let n_layers = net.hidden().len();
    if plan.layers.len() != n_layers {
        return Err(Error::PlanLayerMismatch {
            plan_layers: plan.layers.len(),
            net_layers: n_layers,
        });
    }
    if prior.network().hidden().len() != n_layers {
        return Err(Error::PlanLayerMismatch {
            plan_layers: prior.network().hidden().len(),
            net_layers: n_layers,
        });
    }

    for (k, layer_plan) in plan.layers.iter().enumerate() {
        let alpha = layer_plan.alpha;
        if alpha == 0 {
            continue;
        }
        // Rows of layer k (neuron weights and biases).
        {
            let layer = &mut net.hidden_mut()[k];
            layer.weights = extend_rows(&layer.weights, alpha, init.rho_init, || {
                init.mu_std * rng.normal()
            });
            layer.biases = extend_rows(&layer.biases, alpha, init.rho_init, || {
                init.mu_std * rng.normal()
            });
        }
        {
            let prior_layer = &mut prior.network_mut().hidden_mut()[k];
            prior_layer.weights = extend_rows(&prior_layer.weights, alpha, init.rho_init, || 0.0);
            prior_layer.biases = extend_rows(&prior_layer.biases, alpha, init.rho_init, || 0.0);
        }
        // Columns of the consumer.
        if k + 1 < n_layers {
            let next = &mut net.hidden_mut()[k + 1];
            next.weights = extend_cols(&next.weights, alpha, init.rho_init, || {
                init.mu_std * rng.normal()
            });
            let prior_next = &mut prior.network_mut().hidden_mut()[k + 1];
            prior_next.weights = extend_cols(&prior_next.weights, alpha, init.rho_init, || 0.0);
        } else {
            for (_, head) in net.heads_with_refs_mut() {
                head.layer.weights = extend_cols(&head.layer.weights, alpha, init.rho_init, || {
                    init.mu_std * rng.normal()
                });
            }
            for (_, head) in prior.network_mut().heads_with_refs_mut() {
                head.layer.weights =
                    extend_cols(&head.layer.weights, alpha, init.rho_init, || 0.0);
            }
        }
    }
    net.validate_chaining()?;
    prior.network().validate_chaining()?;
    Ok(())
}
