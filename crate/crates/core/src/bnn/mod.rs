//! Mean-field Gaussian variational MLP.
//!
//! Weights are distributions `N(mu, sigma^2)` with `sigma = exp(0.5 * rho)`,
//! sampled through the reparameterization `w = mu + sigma * eps`. Training
//! minimizes cross-entropy plus the closed-form KL divergence to a prior
//! snapshot, with gradients derived by hand (no autodiff).

mod loss;
mod network;
mod optimizer;
mod param;

pub use loss::{
    accuracy, elbo_loss, elbo_loss_with_eps, predict_classes, predict_probs, LayerGrads,
    LossOutput, NetworkGrads, ParamGrads,
};
pub use network::{
    Activation, EpsilonSet, ForwardMode, ForwardTrace, Head, HeadMode, HeadRef, Heads, LayerSample,
    PosteriorSnapshot, VariationalLayer, VariationalNetwork,
};
pub use optimizer::{Optimizer, OptimizerKind};
pub use param::{gaussian_kl, GaussianParam, InitConfig};
