//! Parameter updates: plain SGD and Adam.
//!
//! One optimizer instance lives for one task's training run; moment buffers
//! are sized lazily from the first step, so structural changes between tasks
//! never leak stale state.

use alloc::vec::Vec;

use libm::{pow, sqrt};

use crate::bnn::loss::NetworkGrads;
use crate::bnn::network::{HeadRef, VariationalNetwork};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adam() -> OptimizerKind {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct MomentPair {
    m: Matrix,
    v: Matrix,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    step_count: u64,
    // One entry per parameter matrix, in visit order: hidden layers front to
    // back (weights mu, weights rho, biases mu, biases rho), then the head.
    moments: Vec<MomentPair>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Optimizer {
        Optimizer {
            kind,
            step_count: 0,
            moments: Vec::new(),
        }
    }

    /// Applies one update to every hidden layer and the selected head.
    pub fn step(
        &mut self,
        net: &mut VariationalNetwork,
        head: HeadRef,
        grads: &NetworkGrads,
        lr: f64,
    ) -> Result<()> {
        if grads.hidden.len() != net.hidden().len() {
            return Err(Error::PlanLayerMismatch {
                plan_layers: grads.hidden.len(),
                net_layers: net.hidden().len(),
            });
        }
        self.step_count += 1;
        let t = self.step_count;

        let mut slot = 0;
        {
            let hidden = net.hidden_mut();
            for (layer, g) in hidden.iter_mut().zip(&grads.hidden) {
                self.update(&mut layer.weights.mu, &g.weights.mu, lr, t, &mut slot)?;
                self.update(&mut layer.weights.rho, &g.weights.rho, lr, t, &mut slot)?;
                self.update(&mut layer.biases.mu, &g.biases.mu, lr, t, &mut slot)?;
                self.update(&mut layer.biases.rho, &g.biases.rho, lr, t, &mut slot)?;
            }
        }
        let head_layer = net.head_mut(head)?;
        self.update(
            &mut head_layer.layer.weights.mu,
            &grads.head.weights.mu,
            lr,
            t,
            &mut slot,
        )?;
        self.update(
            &mut head_layer.layer.weights.rho,
            &grads.head.weights.rho,
            lr,
            t,
            &mut slot,
        )?;
        self.update(
            &mut head_layer.layer.biases.mu,
            &grads.head.biases.mu,
            lr,
            t,
            &mut slot,
        )?;
        self.update(
            &mut head_layer.layer.biases.rho,
            &grads.head.biases.rho,
            lr,
            t,
            &mut slot,
        )?;
        Ok(())
    }

    fn update(
        &mut self,
        p: &mut Matrix,
        g: &Matrix,
        lr: f64,
        t: u64,
        slot: &mut usize,
    ) -> Result<()> {
        if p.shape() != g.shape() {
            return Err(Error::ShapeMismatch {
                op: "optimizer step",
                left: p.shape(),
                right: g.shape(),
            });
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (pv, &gv) in p.data_mut().iter_mut().zip(g.data()) {
                    *pv -= lr * gv;
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                if *slot == self.moments.len() {
                    self.moments.push(MomentPair {
                        m: Matrix::zeros(p.rows(), p.cols()),
                        v: Matrix::zeros(p.rows(), p.cols()),
                    });
                }
                let mp = self
                    .moments
                    .get_mut(*slot)
                    .ok_or(Error::InvalidConfig("optimizer state out of sync"))?;
                if mp.m.shape() != p.shape() {
                    return Err(Error::InvalidConfig(
                        "optimizer state does not match network structure",
                    ));
                }
                let bc1 = 1.0 - pow(beta1, t as f64);
                let bc2 = 1.0 - pow(beta2, t as f64);
                let pd = p.data_mut();
                let md = mp.m.data_mut();
                let vd = mp.v.data_mut();
                for i in 0..pd.len() {
                    let gv = g.data()[i];
                    md[i] = beta1 * md[i] + (1.0 - beta1) * gv;
                    vd[i] = beta2 * vd[i] + (1.0 - beta2) * gv * gv;
                    let m_hat = md[i] / bc1;
                    let v_hat = vd[i] / bc2;
                    pd[i] -= lr * m_hat / (sqrt(v_hat) + epsilon);
                }
            }
        }
        *slot += 1;
        Ok(())
    }
}
