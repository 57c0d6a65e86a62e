//! Network structure, output heads, posterior snapshots and the forward pass.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::bnn::param::{GaussianParam, InitConfig};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative as a function of the pre-activation.
    #[inline]
    pub fn grad(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One dense variational layer. Weights are `fan_out x fan_in`, biases
/// `fan_out x 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalLayer {
    pub weights: GaussianParam,
    pub biases: GaussianParam,
    pub activation: Activation,
}

impl VariationalLayer {
    pub fn init(
        fan_out: usize,
        fan_in: usize,
        activation: Activation,
        init: &InitConfig,
        rng: &mut Rng,
    ) -> VariationalLayer {
        VariationalLayer {
            weights: GaussianParam::init(fan_out, fan_in, init, rng),
            biases: GaussianParam::init(fan_out, 1, init, rng),
            activation,
        }
    }

    #[inline]
    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_params(&self) -> usize {
        self.weights.n_params() + self.biases.n_params()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMode {
    Single,
    Multi,
}

/// Selects the output layer for a forward pass or a training step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadRef {
    /// The shared single head.
    Shared,
    /// The task-specific head of a multi-head network.
    Task(usize),
}

/// An output layer together with the class id each of its rows stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub layer: VariationalLayer,
    pub classes: Vec<u32>,
}

/// Output topology: one shared growing head, or one head per task.
#[derive(Debug, Clone, PartialEq)]
pub enum Heads {
    /// `None` until the first task attaches classes.
    Single(Option<Head>),
    Multi(BTreeMap<usize, Head>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalNetwork {
    input_dim: usize,
    hidden: Vec<VariationalLayer>,
    heads: Heads,
}

impl VariationalNetwork {
    /// Builds the hidden stack with ReLU activations. Heads are attached
    /// separately because they depend on the continual-learning scenario.
    pub fn new(
        input_dim: usize,
        hidden_sizes: &[usize],
        head_mode: HeadMode,
        init: &InitConfig,
        rng: &mut Rng,
    ) -> Result<VariationalNetwork> {
        if !init.rho_init.is_finite() || !init.mu_std.is_finite() {
            return Err(Error::InvalidConfig("rho_init and mu_std must be finite"));
        }
        if input_dim == 0 {
            return Err(Error::ZeroWidthLayer { index: 0 });
        }
        if hidden_sizes.is_empty() {
            return Err(Error::InvalidConfig("at least one hidden layer required"));
        }
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        let mut fan_in = input_dim;
        for (i, &size) in hidden_sizes.iter().enumerate() {
            if size == 0 {
                return Err(Error::ZeroWidthLayer { index: i + 1 });
            }
            hidden.push(VariationalLayer::init(
                size,
                fan_in,
                Activation::Relu,
                init,
                rng,
            ));
            fan_in = size;
        }
        let heads = match head_mode {
            HeadMode::Single => Heads::Single(None),
            HeadMode::Multi => Heads::Multi(BTreeMap::new()),
        };
        Ok(VariationalNetwork {
            input_dim,
            hidden,
            heads,
        })
    }

    /// Reassembles a network from raw parts (checkpoint loading); validates
    /// dimension chaining and head consistency.
    pub fn from_parts(
        input_dim: usize,
        hidden: Vec<VariationalLayer>,
        heads: Heads,
    ) -> Result<VariationalNetwork> {
        let net = VariationalNetwork {
            input_dim,
            hidden,
            heads,
        };
        net.validate_chaining()?;
        Ok(net)
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    #[inline]
    pub fn hidden(&self) -> &[VariationalLayer] {
        &self.hidden
    }

    /// Mutable access to the hidden stack, for structural surgery and
    /// test oracles. Run [`VariationalNetwork::validate_chaining`] after any
    /// shape-changing edit.
    #[inline]
    pub fn hidden_mut(&mut self) -> &mut [VariationalLayer] {
        &mut self.hidden
    }

    #[inline]
    pub fn heads(&self) -> &Heads {
        &self.heads
    }

    pub fn head_mode(&self) -> HeadMode {
        match self.heads {
            Heads::Single(_) => HeadMode::Single,
            Heads::Multi(_) => HeadMode::Multi,
        }
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.fan_out()).collect()
    }

    pub fn total_hidden_weights(&self) -> usize {
        self.hidden.iter().map(|l| l.weights.n_params()).sum()
    }

    pub fn head(&self, head: HeadRef) -> Result<&Head> {
        match (&self.heads, head) {
            (Heads::Single(Some(h)), HeadRef::Shared) => Ok(h),
            (Heads::Single(None), HeadRef::Shared) => Err(Error::UnknownHead { task: None }),
            (Heads::Multi(map), HeadRef::Task(t)) => {
                map.get(&t).ok_or(Error::UnknownHead { task: Some(t) })
            }
            (Heads::Single(_), HeadRef::Task(t)) => Err(Error::UnknownHead { task: Some(t) }),
            (Heads::Multi(_), HeadRef::Shared) => Err(Error::UnknownHead { task: None }),
        }
    }

    pub fn head_mut(&mut self, head: HeadRef) -> Result<&mut Head> {
        match (&mut self.heads, head) {
            (Heads::Single(Some(h)), HeadRef::Shared) => Ok(h),
            (Heads::Single(None), HeadRef::Shared) => Err(Error::UnknownHead { task: None }),
            (Heads::Multi(map), HeadRef::Task(t)) => {
                map.get_mut(&t).ok_or(Error::UnknownHead { task: Some(t) })
            }
            (Heads::Single(_), HeadRef::Task(t)) => Err(Error::UnknownHead { task: Some(t) }),
            (Heads::Multi(_), HeadRef::Shared) => Err(Error::UnknownHead { task: None }),
        }
    }

    pub fn single_head(&self) -> Option<&Head> {
        match &self.heads {
            Heads::Single(h) => h.as_ref(),
            Heads::Multi(_) => None,
        }
    }

    pub(crate) fn set_single_head(&mut self, head: Head) -> Result<()> {
        match &mut self.heads {
            Heads::Single(slot) => {
                *slot = Some(head);
                Ok(())
            }
            Heads::Multi(_) => Err(Error::InvalidConfig(
                "cannot set a shared head on a multi-head network",
            )),
        }
    }

    /// Attaches a fresh task head (multi-head networks only).
    pub fn attach_task_head(
        &mut self,
        task: usize,
        classes: &[u32],
        init: &InitConfig,
        rng: &mut Rng,
    ) -> Result<()> {
        if classes.is_empty() {
            return Err(Error::EmptyInput("head classes"));
        }
        let fan_in = self
            .hidden
            .last()
            .map(|l| l.fan_out())
            .ok_or(Error::InvalidConfig("network has no hidden layers"))?;
        match &mut self.heads {
            Heads::Multi(map) => {
                if map.contains_key(&task) {
                    return Err(Error::InvalidConfig("task head already exists"));
                }
                let layer = VariationalLayer::init(
                    classes.len(),
                    fan_in,
                    Activation::Identity,
                    init,
                    rng,
                );
                map.insert(
                    task,
                    Head {
                        layer,
                        classes: classes.to_vec(),
                    },
                );
                Ok(())
            }
            Heads::Single(_) => Err(Error::InvalidConfig(
                "cannot attach a task head to a single-head network",
            )),
        }
    }

    /// All existing heads with the selector that reaches them.
    pub fn heads_with_refs(&self) -> Vec<(HeadRef, &Head)> {
        match &self.heads {
            Heads::Single(Some(h)) => vec![(HeadRef::Shared, h)],
            Heads::Single(None) => Vec::new(),
            Heads::Multi(map) => map.iter().map(|(&t, h)| (HeadRef::Task(t), h)).collect(),
        }
    }

    pub(crate) fn heads_with_refs_mut(&mut self) -> Vec<(HeadRef, &mut Head)> {
        match &mut self.heads {
            Heads::Single(Some(h)) => vec![(HeadRef::Shared, h)],
            Heads::Single(None) => Vec::new(),
            Heads::Multi(map) => map
                .iter_mut()
                .map(|(&t, h)| (HeadRef::Task(t), h))
                .collect(),
        }
    }

    /// Checks that consecutive layer dimensions chain and that every head
    /// hangs off the last hidden layer. Run after every structural mutation.
    pub fn validate_chaining(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::InvalidConfig("at least one hidden layer required"));
        }
        let mut fan_in = self.input_dim;
        for layer in &self.hidden {
            if layer.fan_in() != fan_in {
                return Err(Error::InputDimMismatch {
                    expected: fan_in,
                    found: layer.fan_in(),
                });
            }
            if layer.weights.rows() != layer.biases.rows() || layer.biases.cols() != 1 {
                return Err(Error::ShapeMismatch {
                    op: "layer bias",
                    left: layer.weights.shape(),
                    right: layer.biases.shape(),
                });
            }
            fan_in = layer.fan_out();
        }
        for (_, head) in self.heads_with_refs() {
            if head.layer.fan_in() != fan_in {
                return Err(Error::InputDimMismatch {
                    expected: fan_in,
                    found: head.layer.fan_in(),
                });
            }
            if head.classes.len() != head.layer.fan_out() {
                return Err(Error::SnapshotMismatch("head classes vs rows"));
            }
        }
        Ok(())
    }

    pub fn snapshot(&self, task_index: usize) -> PosteriorSnapshot {
        PosteriorSnapshot {
            task_index,
            net: self.clone(),
        }
    }

    /// Deterministic mean-only pass that records post-activations of every
    /// hidden layer. Used for activation statistics; needs no output head.
    pub fn hidden_mean_activations(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        if x.cols() != self.input_dim {
            return Err(Error::InputDimMismatch {
                expected: self.input_dim,
                found: x.cols(),
            });
        }
        let mut acts = Vec::with_capacity(self.hidden.len());
        let mut current = x.clone();
        for layer in &self.hidden {
            let mut z = current.matmul_nt(&layer.weights.mu)?;
            z.add_row_broadcast(layer.biases.mu.data())?;
            let a = z.map(|v| layer.activation.apply(v));
            acts.push(a.clone());
            current = a;
        }
        Ok(acts)
    }

    /// Forward pass over a batch (rows are samples).
    pub fn forward(&self, x: &Matrix, head: HeadRef, mode: ForwardMode) -> Result<ForwardTrace> {
        match mode {
            ForwardMode::MeanOnly => {
                let eps = EpsilonSet::zeros(self, head)?;
                self.forward_with_eps(x, head, &eps)
            }
            ForwardMode::Sampled(rng) => {
                let eps = EpsilonSet::sample(self, head, rng)?;
                self.forward_with_eps(x, head, &eps)
            }
        }
    }

    /// Forward pass with externally supplied noise. Sharing one `EpsilonSet`
    /// between an analytic and a numeric loss evaluation keeps finite
    /// differences well-defined.
    pub fn forward_with_eps(
        &self,
        x: &Matrix,
        head: HeadRef,
        eps: &EpsilonSet,
    ) -> Result<ForwardTrace> {
        if x.cols() != self.input_dim {
            return Err(Error::InputDimMismatch {
                expected: self.input_dim,
                found: x.cols(),
            });
        }
        let head_layer = self.head(head)?;
        if eps.hidden.len() != self.hidden.len() {
            return Err(Error::PlanLayerMismatch {
                plan_layers: eps.hidden.len(),
                net_layers: self.hidden.len(),
            });
        }

        let mut activations = Vec::with_capacity(self.hidden.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.hidden.len());
        let mut hidden_samples = Vec::with_capacity(self.hidden.len());
        activations.push(x.clone());

        for (k, layer) in self.hidden.iter().enumerate() {
            let (ew, eb) = &eps.hidden[k];
            let w = layer.weights.sample(ew)?;
            let b = layer.biases.sample(eb)?;
            let mut z = activations[k].matmul_nt(&w)?;
            z.add_row_broadcast(b.data())?;
            let a = z.map(|v| layer.activation.apply(v));
            pre_activations.push(z);
            activations.push(a);
            hidden_samples.push(LayerSample {
                w,
                b,
                eps_w: ew.clone(),
                eps_b: eb.clone(),
            });
        }

        let (ew, eb) = &eps.head;
        let w = head_layer.layer.weights.sample(ew)?;
        let b = head_layer.layer.biases.sample(eb)?;
        let mut logits = activations.last().unwrap().matmul_nt(&w)?;
        logits.add_row_broadcast(b.data())?;
        let head_sample = LayerSample {
            w,
            b,
            eps_w: ew.clone(),
            eps_b: eb.clone(),
        };

        Ok(ForwardTrace {
            activations,
            pre_activations,
            hidden_samples,
            head_sample,
            logits,
        })
    }
}

/// Sampling mode of a forward pass.
pub enum ForwardMode<'a> {
    /// `eps = 0` everywhere: a pure function of parameters and input.
    MeanOnly,
    /// Reparameterized sampling; noise is drawn once per layer per call,
    /// shared across the batch rows.
    Sampled(&'a mut Rng),
}

/// The weight/bias realization one layer used during a forward pass.
#[derive(Debug, Clone)]
pub struct LayerSample {
    pub w: Matrix,
    pub b: Matrix,
    pub eps_w: Matrix,
    pub eps_b: Matrix,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `activations[0]` is the input, `activations[k]` the post-activation of
    /// hidden layer `k - 1`.
    pub activations: Vec<Matrix>,
    pub pre_activations: Vec<Matrix>,
    pub hidden_samples: Vec<LayerSample>,
    pub head_sample: LayerSample,
    pub logits: Matrix,
}

/// One noise draw per parameter matrix: hidden layers in order (weights,
/// biases), then the selected head.
#[derive(Debug, Clone)]
pub struct EpsilonSet {
    pub hidden: Vec<(Matrix, Matrix)>,
    pub head: (Matrix, Matrix),
}

impl EpsilonSet {
    pub fn zeros(net: &VariationalNetwork, head: HeadRef) -> Result<EpsilonSet> {
        let head_layer = net.head(head)?;
        Ok(EpsilonSet {
            hidden: net
                .hidden()
                .iter()
                .map(|l| {
                    (
                        Matrix::zeros(l.fan_out(), l.fan_in()),
                        Matrix::zeros(l.fan_out(), 1),
                    )
                })
                .collect(),
            head: (
                Matrix::zeros(head_layer.layer.fan_out(), head_layer.layer.fan_in()),
                Matrix::zeros(head_layer.layer.fan_out(), 1),
            ),
        })
    }

    /// Draw order is fixed: hidden layers front to back, weights before
    /// biases, head last.
    pub fn sample(net: &VariationalNetwork, head: HeadRef, rng: &mut Rng) -> Result<EpsilonSet> {
        let head_layer = net.head(head)?;
        let hidden = net
            .hidden()
            .iter()
            .map(|l| {
                (
                    rng.normal_matrix(l.fan_out(), l.fan_in()),
                    rng.normal_matrix(l.fan_out(), 1),
                )
            })
            .collect();
        let head = (
            rng.normal_matrix(head_layer.layer.fan_out(), head_layer.layer.fan_in()),
            rng.normal_matrix(head_layer.layer.fan_out(), 1),
        );
        Ok(EpsilonSet { hidden, head })
    }
}

/// A frozen deep copy of every variational parameter, tagged with the task it
/// was taken after. Serves as the prior `q_{t-1}` of the next task and as the
/// restore source for single-head output expansion. Structural operations
/// (pruning, growth) extend it in lockstep with the live network.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSnapshot {
    task_index: usize,
    net: VariationalNetwork,
}

impl PosteriorSnapshot {
    pub fn of(net: &VariationalNetwork, task_index: usize) -> PosteriorSnapshot {
        net.snapshot(task_index)
    }

    /// The fresh-init prior `q_0`: zero-centered, `rho = rho_init`, matching
    /// the given network's current shapes (including existing heads).
    pub fn prior_like(net: &VariationalNetwork, rho_init: f64) -> PosteriorSnapshot {
        let mut prior = net.clone();
        for layer in prior.hidden_mut() {
            layer.weights = GaussianParam::prior(layer.weights.rows(), layer.weights.cols(), rho_init);
            layer.biases = GaussianParam::prior(layer.biases.rows(), 1, rho_init);
        }
        for (_, head) in prior.heads_with_refs_mut() {
            head.layer.weights = GaussianParam::prior(
                head.layer.weights.rows(),
                head.layer.weights.cols(),
                rho_init,
            );
            head.layer.biases = GaussianParam::prior(head.layer.biases.rows(), 1, rho_init);
        }
        PosteriorSnapshot {
            task_index: 0,
            net: prior,
        }
    }

    #[inline]
    pub fn task_index(&self) -> usize {
        self.task_index
    }

    #[inline]
    pub fn network(&self) -> &VariationalNetwork {
        &self.net
    }

    #[inline]
    pub(crate) fn network_mut(&mut self) -> &mut VariationalNetwork {
        &mut self.net
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn init() -> InitConfig {
        InitConfig {
            mu_std: 0.1,
            rho_init: -6.0,
        }
    }

    #[test]
    fn init_network_sets_rho_constant_and_mu_random() {
        let mut rng = Rng::new(42);
        let net =
            VariationalNetwork::new(4, &[3, 2], HeadMode::Single, &init(), &mut rng).unwrap();
        assert_eq!(net.hidden_sizes(), vec![3, 2]);
        for layer in net.hidden() {
            assert!(layer.weights.rho.data().iter().all(|&r| r == -6.0));
            let sigma = layer.weights.sigma();
            for &s in sigma.data() {
                assert!((s - (-3.0f64).exp()).abs() < 1e-15);
            }
        }
        // same seed, same means
        let mut rng2 = Rng::new(42);
        let net2 =
            VariationalNetwork::new(4, &[3, 2], HeadMode::Single, &init(), &mut rng2).unwrap();
        assert_eq!(net.hidden()[0].weights.mu, net2.hidden()[0].weights.mu);
    }

    #[test]
    fn zero_width_layer_is_rejected() {
        let mut rng = Rng::new(1);
        let err =
            VariationalNetwork::new(4, &[3, 0], HeadMode::Single, &init(), &mut rng).unwrap_err();
        assert_eq!(err, Error::ZeroWidthLayer { index: 2 });
    }

    #[test]
    fn unknown_head_errors() {
        let mut rng = Rng::new(1);
        let net =
            VariationalNetwork::new(4, &[3], HeadMode::Single, &init(), &mut rng).unwrap();
        assert!(matches!(
            net.head(HeadRef::Shared),
            Err(Error::UnknownHead { task: None })
        ));
        assert!(matches!(
            net.head(HeadRef::Task(0)),
            Err(Error::UnknownHead { task: Some(0) })
        ));
    }

    #[test]
    fn mean_only_forward_of_zero_network_is_zero() {
        let mut rng = Rng::new(1);
        let zero_init = InitConfig {
            mu_std: 0.0,
            rho_init: -6.0,
        };
        let mut net =
            VariationalNetwork::new(3, &[4], HeadMode::Multi, &zero_init, &mut rng).unwrap();
        net.attach_task_head(0, &[0, 1], &zero_init, &mut rng).unwrap();
        let x = Matrix::from_rows(&[&[0.5, -1.0, 2.0]]).unwrap();
        let trace = net
            .forward(&x, HeadRef::Task(0), ForwardMode::MeanOnly)
            .unwrap();
        assert!(trace.logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sampled_forward_is_deterministic_given_seed() {
        let mut rng = Rng::new(5);
        let mut net =
            VariationalNetwork::new(3, &[4], HeadMode::Single, &init(), &mut rng).unwrap();
        net.set_single_head(Head {
            layer: VariationalLayer::init(2, 4, Activation::Identity, &init(), &mut rng),
            classes: vec![0, 1],
        })
        .unwrap();
        let x = Matrix::from_rows(&[&[0.5, -1.0, 2.0], &[0.0, 0.1, 0.2]]).unwrap();
        let t1 = net
            .forward(&x, HeadRef::Shared, ForwardMode::Sampled(&mut Rng::new(99)))
            .unwrap();
        let t2 = net
            .forward(&x, HeadRef::Shared, ForwardMode::Sampled(&mut Rng::new(99)))
            .unwrap();
        assert_eq!(t1.logits, t2.logits);
    }

    #[test]
    fn relu_layer_zeroes_negative_preactivations() {
        // identity-like positive weights, negative input -> all-zero hidden
        let mut rng = Rng::new(1);
        let zero_init = InitConfig {
            mu_std: 0.0,
            rho_init: -6.0,
        };
        let mut net =
            VariationalNetwork::new(2, &[2], HeadMode::Single, &zero_init, &mut rng).unwrap();
        net.hidden_mut()[0].weights.mu = Matrix::identity(2);
        net.set_single_head(Head {
            layer: VariationalLayer::init(2, 2, Activation::Identity, &zero_init, &mut rng),
            classes: vec![0, 1],
        })
        .unwrap();
        let x = Matrix::from_rows(&[&[-1.0, -2.0]]).unwrap();
        let trace = net.forward(&x, HeadRef::Shared, ForwardMode::MeanOnly).unwrap();
        assert!(trace.activations[1].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chaining_is_validated() {
        let mut rng = Rng::new(8);
        let net =
            VariationalNetwork::new(5, &[4, 3], HeadMode::Single, &init(), &mut rng).unwrap();
        net.validate_chaining().unwrap();
        let mut broken = net;
        broken.hidden_mut()[1].weights =
            GaussianParam::prior(3, 7, -6.0);
        assert!(broken.validate_chaining().is_err());
    }
}
