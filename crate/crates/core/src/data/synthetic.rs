//! Deterministic synthetic task streams for fast tests.
//!
//! Each class is an isotropic unit-variance Gaussian blob; class means are
//! placed by seeded rejection sampling so every pair is at least `separation`
//! apart. Tasks take consecutive disjoint class groups, split 80/20 into
//! train and test.

use alloc::vec::Vec;

use crate::data::{LabeledDataset, Task, TaskStream};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_tasks: usize,
    pub classes_per_task: usize,
    pub dim: usize,
    /// Minimum pairwise distance between class means.
    pub separation: f64,
    /// Samples per class (split 80/20 into train/test).
    pub n_per_class: usize,
    pub seed: u64,
}

pub fn build_synthetic_stream(cfg: &SyntheticConfig) -> Result<TaskStream> {
    if cfg.n_tasks == 0 || cfg.classes_per_task == 0 {
        return Err(Error::EmptyInput("synthetic stream"));
    }
    if !(cfg.separation > 0.0) {
        return Err(Error::InvalidConfig("separation must be positive"));
    }
    if cfg.dim == 0 {
        return Err(Error::InvalidConfig("dim must be positive"));
    }
    if cfg.n_per_class < 2 {
        return Err(Error::InvalidConfig("need at least 2 samples per class"));
    }

    let n_classes = cfg.n_tasks * cfg.classes_per_task;
    let mut rng = Rng::substream(cfg.seed, 0x5B10B5);

    // Rejection-sample the means; widen the proposal if placement stalls.
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(n_classes);
    let mut spread = cfg.separation * 2.0;
    while means.len() < n_classes {
        let mut placed = false;
        for _ in 0..200 {
            let candidate: Vec<f64> = (0..cfg.dim).map(|_| rng.normal() * spread).collect();
            let ok = means.iter().all(|m| {
                let d2: f64 = m
                    .iter()
                    .zip(&candidate)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                d2 >= cfg.separation * cfg.separation
            });
            if ok {
                means.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            spread *= 1.5;
        }
    }

    let n_train = (cfg.n_per_class * 4) / 5;
    let n_train = n_train.max(1).min(cfg.n_per_class - 1);
    let mut tasks = Vec::with_capacity(cfg.n_tasks);
    for t in 0..cfg.n_tasks {
        let classes: Vec<u32> = (0..cfg.classes_per_task)
            .map(|c| (t * cfg.classes_per_task + c) as u32)
            .collect();
        let mut train_rows = Vec::new();
        let mut train_labels = Vec::new();
        let mut test_rows = Vec::new();
        let mut test_labels = Vec::new();
        for &class in &classes {
            let mean = &means[class as usize];
            for i in 0..cfg.n_per_class {
                let row: Vec<f64> = mean.iter().map(|&m| m + rng.normal()).collect();
                if i < n_train {
                    train_rows.push(row);
                    train_labels.push(class);
                } else {
                    test_rows.push(row);
                    test_labels.push(class);
                }
            }
        }
        let to_matrix = |rows: &[Vec<f64>]| -> Matrix {
            let mut m = Matrix::zeros(rows.len(), cfg.dim);
            for (r, row) in rows.iter().enumerate() {
                m.row_mut(r).copy_from_slice(row);
            }
            m
        };
        tasks.push(Task {
            id: t,
            train: LabeledDataset::new(to_matrix(&train_rows), train_labels)?,
            test: LabeledDataset::new(to_matrix(&test_rows), test_labels)?,
            classes,
        });
    }
    TaskStream::new(tasks)
}
