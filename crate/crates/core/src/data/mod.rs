//! Datasets and task-stream construction.
//!
//! File parsing lives in the companion crate; everything here operates on
//! in-memory data and is deterministic given a seed.

mod dataset;
mod stream;
mod synthetic;

pub use dataset::{subsample_per_class, LabeledDataset};
pub use stream::{
    build_permuted_stream, build_split_stream, Task, TaskStream, MNIST_SPLIT_GROUPS,
};
pub use synthetic::{build_synthetic_stream, SyntheticConfig};
