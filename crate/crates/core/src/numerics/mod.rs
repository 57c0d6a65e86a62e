//! Minimal dense linear algebra, seedable randomness and elementary neural
//! functions. Everything else in the crate is built on this module.

mod functions;
mod matrix;
mod rng;

pub use functions::{log_softmax, log_softmax_in_place, softmax_in_place};
pub use matrix::Matrix;
pub use rng::Rng;
