//! Continual learning for mean-field Bayesian multilayer perceptrons.
//!
//! The crate trains a variational MLP on a sequence of classification tasks
//! without catastrophic forgetting by combining four mechanisms:
//!
//! - KL-regularized variational training where the posterior of the previous
//!   task becomes the prior of the next ([`bnn`], [`continual`]);
//! - signal-to-noise-ratio pruning that re-initializes insignificant weights
//!   and frees their capacity ([`plasticity`]);
//! - principled neuron growth that adds capacity only where shared
//!   representations and freed capacity do not cover the incoming task
//!   ([`plasticity`]);
//! - coreset rehearsal with single-head and multi-head output protocols
//!   ([`continual`]).
//!
//! Everything is `no_std` + `alloc`: the crate is a pure algorithmic core with
//! deterministic, seedable randomness. File formats, checkpoints and the CLI
//! live in the companion `bayescl-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bnn;
pub mod continual;
pub mod data;
pub mod error;
pub mod numerics;
pub mod plasticity;

pub use error::{Error, Result};
