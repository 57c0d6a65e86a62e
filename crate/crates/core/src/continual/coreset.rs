//! Coreset management: per-task retained samples for rehearsal.

use alloc::vec::Vec;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct TaskCoreset {
    pub task_id: usize,
    pub data: LabeledDataset,
}

/// Per-task retained sample subsets, appended as tasks arrive.
#[derive(Debug, Clone, PartialEq)]
pub struct Coreset {
    pub quota: usize,
    tasks: Vec<TaskCoreset>,
}

impl Coreset {
    pub fn new(quota: usize) -> Coreset {
        Coreset {
            quota,
            tasks: Vec::new(),
        }
    }

    pub fn push(&mut self, task_id: usize, data: LabeledDataset) {
        self.tasks.push(TaskCoreset { task_id, data });
    }

    pub fn tasks(&self) -> &[TaskCoreset] {
        &self.tasks
    }

    pub fn task(&self, task_id: usize) -> Option<&LabeledDataset> {
        self.tasks
            .iter()
            .find(|t| t.task_id == task_id)
            .map(|t| &t.data)
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.iter().all(|t| t.data.is_empty())
    }

    /// Union of every stored task coreset.
    pub fn union(&self) -> Result<LabeledDataset> {
        let parts: Vec<&LabeledDataset> = self
            .tasks
            .iter()
            .map(|t| &t.data)
            .filter(|d| !d.is_empty())
            .collect();
        if parts.is_empty() {
            return Err(Error::EmptyCoresetScope);
        }
        LabeledDataset::concat(&parts)
    }
}

/// Draws `quota` samples uniformly at random without replacement into the
/// coreset; the remaining rows form the training split. Both halves preserve
/// the source row order, and they are disjoint by construction.
pub fn split_train_coreset(
    data: &LabeledDataset,
    quota: usize,
    rng: &mut Rng,
) -> (LabeledDataset, LabeledDataset) {
    let dim = data.input_dim();
    if quota == 0 {
        let empty = LabeledDataset::new(Matrix::zeros(0, dim), Vec::new())
            .expect("empty dataset is valid");
        return (data.clone(), empty);
    }
    let n = data.len();
    let take = quota.min(n);
    let mut indices: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut indices);
    let mut core_rows = indices[..take].to_vec();
    let mut train_rows = indices[take..].to_vec();
    core_rows.sort_unstable();
    train_rows.sort_unstable();
    (data.select(&train_rows), data.select(&core_rows))
}
