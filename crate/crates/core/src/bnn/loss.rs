//! ELBO loss with hand-derived gradients, and MC-averaged prediction.
//!
//! The per-batch loss is
//!
//! `L = (1/M) * sum_m NLL(batch; w_m) + kl_scale * KL(q || prior)`
//!
//! where `NLL` is the cross-entropy summed over the batch, `w_m` are
//! reparameterized weight draws, and the KL term is computed in closed form
//! (the sampled estimator has the same expectation but higher variance; it
//! survives only as a test oracle). With `kl_scale = 1 / minibatches_per_epoch`
//! the KL contributions of one epoch sum to the full-dataset KL.

use alloc::vec::Vec;

use libm::exp;

use crate::bnn::network::{EpsilonSet, ForwardMode, HeadRef, PosteriorSnapshot, VariationalNetwork};
use crate::bnn::param::{gaussian_kl, GaussianParam};
use crate::error::{Error, Result};
use crate::numerics::{log_softmax_in_place, softmax_in_place, Matrix, Rng};

#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub mu: Matrix,
    pub rho: Matrix,
}

impl ParamGrads {
    fn zeros(rows: usize, cols: usize) -> ParamGrads {
        ParamGrads {
            mu: Matrix::zeros(rows, cols),
            rho: Matrix::zeros(rows, cols),
        }
    }

    fn scale(&mut self, s: f64) {
        self.mu.scale(s);
        self.rho.scale(s);
    }
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: ParamGrads,
    pub biases: ParamGrads,
}

impl LayerGrads {
    fn scale(&mut self, s: f64) {
        self.weights.scale(s);
        self.biases.scale(s);
    }
}

/// Gradients for every hidden layer plus the head that was trained.
#[derive(Debug, Clone)]
pub struct NetworkGrads {
    pub hidden: Vec<LayerGrads>,
    pub head: LayerGrads,
}

impl NetworkGrads {
    pub fn zeros_like(net: &VariationalNetwork, head: HeadRef) -> Result<NetworkGrads> {
        let head_layer = net.head(head)?;
        Ok(NetworkGrads {
            hidden: net
                .hidden()
                .iter()
                .map(|l| LayerGrads {
                    weights: ParamGrads::zeros(l.fan_out(), l.fan_in()),
                    biases: ParamGrads::zeros(l.fan_out(), 1),
                })
                .collect(),
            head: LayerGrads {
                weights: ParamGrads::zeros(head_layer.layer.fan_out(), head_layer.layer.fan_in()),
                biases: ParamGrads::zeros(head_layer.layer.fan_out(), 1),
            },
        })
    }

    fn scale(&mut self, s: f64) {
        for l in &mut self.hidden {
            l.scale(s);
        }
        self.head.scale(s);
    }
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub nll: f64,
    pub kl: f64,
    pub grads: NetworkGrads,
}

/// Draws `n_mc` noise sets and evaluates the loss and its gradients.
pub fn elbo_loss(
    net: &VariationalNetwork,
    inputs: &Matrix,
    labels: &[u32],
    head: HeadRef,
    prior: &PosteriorSnapshot,
    n_mc: usize,
    kl_scale: f64,
    rng: &mut Rng,
) -> Result<LossOutput> {
    if n_mc == 0 {
        return Err(Error::InvalidConfig("n_mc must be at least 1"));
    }
    let mut eps_sets = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        eps_sets.push(EpsilonSet::sample(net, head, rng)?);
    }
    elbo_loss_with_eps(net, inputs, labels, head, prior, &eps_sets, kl_scale)
}

/// Deterministic variant taking the noise explicitly; the finite-difference
/// oracle re-evaluates the loss with the same sets.
pub fn elbo_loss_with_eps(
    net: &VariationalNetwork,
    inputs: &Matrix,
    labels: &[u32],
    head: HeadRef,
    prior: &PosteriorSnapshot,
    eps_sets: &[EpsilonSet],
    kl_scale: f64,
) -> Result<LossOutput> {
    if inputs.rows() == 0 || labels.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    if inputs.rows() != labels.len() {
        return Err(Error::CountMismatch {
            inputs: inputs.rows(),
            labels: labels.len(),
        });
    }
    if eps_sets.is_empty() {
        return Err(Error::InvalidConfig("n_mc must be at least 1"));
    }

    let head_layer = net.head(head)?;
    let label_rows: Vec<usize> = labels
        .iter()
        .map(|&label| {
            head_layer
                .classes
                .iter()
                .position(|&c| c == label)
                .ok_or(Error::LabelNotInHead { label })
        })
        .collect::<Result<_>>()?;

    let mut grads = NetworkGrads::zeros_like(net, head)?;
    let mut nll_total = 0.0;

    for eps in eps_sets {
        let trace = net.forward_with_eps(inputs, head, eps)?;

        // d(NLL)/d(logits) = softmax - onehot, rows handled independently.
        let mut dlogits = trace.logits.clone();
        for (r, &li) in label_rows.iter().enumerate() {
            let row = dlogits.row_mut(r);
            log_softmax_in_place(row)?;
            nll_total -= row[li];
            for v in row.iter_mut() {
                *v = exp(*v);
            }
            row[li] -= 1.0;
        }

        // Head layer.
        let last_act = trace.activations.last().unwrap();
        let d_w = dlogits.matmul_tn(last_act)?;
        let d_b = dlogits.column_sums();
        accumulate(
            &mut grads.head,
            &d_w,
            &d_b,
            &trace.head_sample.eps_w,
            &trace.head_sample.eps_b,
            &head_layer.layer.weights,
            &head_layer.layer.biases,
        );
        let mut d_act = dlogits.matmul(&trace.head_sample.w)?;

        // Hidden layers, back to front.
        for k in (0..net.hidden().len()).rev() {
            let layer = &net.hidden()[k];
            let dz = d_act.zip_map(&trace.pre_activations[k], |g, z| g * layer.activation.grad(z))?;
            let d_w = dz.matmul_tn(&trace.activations[k])?;
            let d_b = dz.column_sums();
            accumulate(
                &mut grads.hidden[k],
                &d_w,
                &d_b,
                &trace.hidden_samples[k].eps_w,
                &trace.hidden_samples[k].eps_b,
                &layer.weights,
                &layer.biases,
            );
            if k > 0 {
                d_act = dz.matmul(&trace.hidden_samples[k].w)?;
            }
        }
    }

    let m = eps_sets.len() as f64;
    grads.scale(1.0 / m);
    let nll = nll_total / m;

    // Closed-form KL against the prior snapshot, plus its analytic gradients:
    // dKL/dmu = (mu - mu_p) / sigma_p^2, dKL/drho = 0.5 (exp(rho - rho_p) - 1).
    let prior_net = prior.network();
    if prior_net.hidden().len() != net.hidden().len() {
        return Err(Error::PlanLayerMismatch {
            plan_layers: prior_net.hidden().len(),
            net_layers: net.hidden().len(),
        });
    }
    let prior_head = prior_net.head(head)?;
    let mut kl = 0.0;
    for k in 0..net.hidden().len() {
        kl += kl_pair(
            &net.hidden()[k].weights,
            &prior_net.hidden()[k].weights,
            &mut grads.hidden[k].weights,
            kl_scale,
        )?;
        kl += kl_pair(
            &net.hidden()[k].biases,
            &prior_net.hidden()[k].biases,
            &mut grads.hidden[k].biases,
            kl_scale,
        )?;
    }
    kl += kl_pair(
        &head_layer.layer.weights,
        &prior_head.layer.weights,
        &mut grads.head.weights,
        kl_scale,
    )?;
    kl += kl_pair(
        &head_layer.layer.biases,
        &prior_head.layer.biases,
        &mut grads.head.biases,
        kl_scale,
    )?;

    Ok(LossOutput {
        loss: nll + kl_scale * kl,
        nll,
        kl,
        grads,
    })
}

/// Maps a sampled-weight gradient onto (mu, rho): `d/dmu = dW`,
/// `d/drho = dW ∘ eps ∘ 0.5 sigma`.
fn accumulate(
    grads: &mut LayerGrads,
    d_w: &Matrix,
    d_b: &[f64],
    eps_w: &Matrix,
    eps_b: &Matrix,
    weights: &GaussianParam,
    biases: &GaussianParam,
) {
    let g = grads.weights.mu.data_mut();
    for (i, &dw) in d_w.data().iter().enumerate() {
        g[i] += dw;
    }
    let g = grads.weights.rho.data_mut();
    let rho = weights.rho.data();
    for (i, &dw) in d_w.data().iter().enumerate() {
        g[i] += dw * eps_w.data()[i] * 0.5 * exp(0.5 * rho[i]);
    }
    let g = grads.biases.mu.data_mut();
    for (i, &db) in d_b.iter().enumerate() {
        g[i] += db;
    }
    let g = grads.biases.rho.data_mut();
    let rho = biases.rho.data();
    for (i, &db) in d_b.iter().enumerate() {
        g[i] += db * eps_b.data()[i] * 0.5 * exp(0.5 * rho[i]);
    }
}

fn kl_pair(
    q: &GaussianParam,
    p: &GaussianParam,
    grads: &mut ParamGrads,
    kl_scale: f64,
) -> Result<f64> {
    let kl = gaussian_kl(q, p)?;
    let gm = grads.mu.data_mut();
    let gr = grads.rho.data_mut();
    for i in 0..q.mu.len() {
        let mu_q = q.mu.data()[i];
        let mu_p = p.mu.data()[i];
        let rho_q = q.rho.data()[i];
        let rho_p = p.rho.data()[i];
        gm[i] += kl_scale * (mu_q - mu_p) / exp(rho_p);
        gr[i] += kl_scale * 0.5 * (exp(rho_q - rho_p) - 1.0);
    }
    Ok(kl)
}

/// MC-averaged softmax probabilities, one row per input, one column per head
/// class.
pub fn predict_probs(
    net: &VariationalNetwork,
    inputs: &Matrix,
    head: HeadRef,
    n_mc: usize,
    rng: &mut Rng,
) -> Result<Matrix> {
    if n_mc == 0 {
        return Err(Error::InvalidConfig("n_mc must be at least 1"));
    }
    let head_layer = net.head(head)?;
    let mut acc = Matrix::zeros(inputs.rows(), head_layer.classes.len());
    for _ in 0..n_mc {
        let trace = net.forward(inputs, head, ForwardMode::Sampled(rng))?;
        let mut probs = trace.logits;
        for r in 0..probs.rows() {
            softmax_in_place(probs.row_mut(r))?;
        }
        for (a, &p) in acc.data_mut().iter_mut().zip(probs.data()) {
            *a += p;
        }
    }
    acc.scale(1.0 / n_mc as f64);
    Ok(acc)
}

/// Argmax of the MC-averaged softmax, mapped back to class ids. Ties break
/// toward the lowest class id.
pub fn predict_classes(
    net: &VariationalNetwork,
    inputs: &Matrix,
    head: HeadRef,
    n_mc: usize,
    rng: &mut Rng,
) -> Result<Vec<u32>> {
    let head_layer = net.head(head)?;
    let probs = predict_probs(net, inputs, head, n_mc, rng)?;
    let mut out = Vec::with_capacity(probs.rows());
    for r in 0..probs.rows() {
        let row = probs.row(r);
        let mut best_class = u32::MAX;
        let mut best_p = f64::NEG_INFINITY;
        for (c, &p) in row.iter().enumerate() {
            let class = head_layer.classes[c];
            if p > best_p || (p == best_p && class < best_class) {
                best_p = p;
                best_class = class;
            }
        }
        out.push(best_class);
    }
    Ok(out)
}

/// Fraction of matching entries.
pub fn accuracy(predicted: &[u32], labels: &[u32]) -> f64 {
    debug_assert_eq!(predicted.len(), labels.len());
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    hits as f64 / predicted.len() as f64
}
