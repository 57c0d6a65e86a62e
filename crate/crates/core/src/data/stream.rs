//! Task streams: split (class-incremental) and permuted (domain-incremental)
//! builders.

use alloc::vec::Vec;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// One task of a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: usize,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Sorted classes this task carries.
    pub classes: Vec<u32>,
}

/// Ordered sequence of tasks sharing one input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
}

impl TaskStream {
    pub fn new(tasks: Vec<Task>) -> Result<TaskStream> {
        let first = tasks.first().ok_or(Error::EmptyInput("task stream"))?;
        let dim = first.train.input_dim();
        for task in &tasks {
            for ds in [&task.train, &task.test] {
                if ds.input_dim() != dim {
                    return Err(Error::InputDimMismatch {
                        expected: dim,
                        found: ds.input_dim(),
                    });
                }
            }
        }
        Ok(TaskStream { tasks })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.tasks[0].train.input_dim()
    }

    /// Errors if any class appears in more than one task (required by the
    /// multi-head protocol).
    pub fn ensure_disjoint_classes(&self) -> Result<()> {
        let mut seen: Vec<u32> = Vec::new();
        for task in &self.tasks {
            for &c in &task.classes {
                if seen.contains(&c) {
                    return Err(Error::ClassCollision { class: c });
                }
                seen.push(c);
            }
        }
        Ok(())
    }
}

/// The default split-MNIST grouping: five two-class tasks.
pub const MNIST_SPLIT_GROUPS: [[u32; 2]; 5] = [[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]];

/// Splits one dataset into class-incremental tasks, one per class group.
pub fn build_split_stream(
    train: &LabeledDataset,
    test: &LabeledDataset,
    groups: &[Vec<u32>],
) -> Result<TaskStream> {
    if groups.is_empty() {
        return Err(Error::EmptyInput("class groups"));
    }
    let mut seen: Vec<u32> = Vec::new();
    for group in groups {
        for &c in group {
            if seen.contains(&c) {
                return Err(Error::OverlappingGroups { class: c });
            }
            if !train.class_set.contains(&c) {
                return Err(Error::MissingClass { class: c });
            }
            seen.push(c);
        }
    }
    let tasks = groups
        .iter()
        .enumerate()
        .map(|(id, group)| {
            let mut classes = group.clone();
            classes.sort_unstable();
            Task {
                id,
                train: train.filter_classes(&classes),
                test: test.filter_classes(&classes),
                classes,
            }
        })
        .collect();
    TaskStream::new(tasks)
}

/// Permuted-input tasks: task 0 is the identity, every later task applies its
/// own fixed seed-derived pixel permutation to train and test inputs. Labels
/// and class sets are unchanged.
pub fn build_permuted_stream(
    train: &LabeledDataset,
    test: &LabeledDataset,
    n_tasks: usize,
    seed: u64,
) -> Result<TaskStream> {
    if n_tasks == 0 {
        return Err(Error::EmptyInput("task stream"));
    }
    let dim = train.input_dim();
    let mut tasks = Vec::with_capacity(n_tasks);
    for id in 0..n_tasks {
        let (tr, te) = if id == 0 {
            (train.clone(), test.clone())
        } else {
            let mut perm: Vec<usize> = (0..dim).collect();
            // stream tag 0x70 ("p") keeps permutations independent of other uses
            let mut rng = Rng::substream(seed, 0x70 ^ (id as u64) << 8);
            rng.shuffle(&mut perm);
            (permute_inputs(train, &perm), permute_inputs(test, &perm))
        };
        tasks.push(Task {
            id,
            classes: tr.class_set.clone(),
            train: tr,
            test: te,
        });
    }
    TaskStream::new(tasks)
}

fn permute_inputs(ds: &LabeledDataset, perm: &[usize]) -> LabeledDataset {
    let mut inputs = Matrix::zeros(ds.inputs.rows(), ds.inputs.cols());
    for r in 0..ds.inputs.rows() {
        let src = ds.inputs.row(r);
        let dst = inputs.row_mut(r);
        for (j, &p) in perm.iter().enumerate() {
            dst[j] = src[p];
        }
    }
    LabeledDataset::new(inputs, ds.labels.clone()).expect("permutation preserves counts")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (LabeledDataset, LabeledDataset) {
        let mut train_inputs = Matrix::zeros(6, 8);
        for r in 0..6 {
            for c in 0..8 {
                train_inputs.set(r, c, (r * 8 + c) as f64);
            }
        }
        let train = LabeledDataset::new(train_inputs, vec![0, 1, 2, 3, 0, 2]).unwrap();
        let mut test_inputs = Matrix::zeros(4, 8);
        for r in 0..4 {
            for c in 0..8 {
                test_inputs.set(r, c, (100 + r * 8 + c) as f64);
            }
        }
        let test = LabeledDataset::new(test_inputs, vec![0, 1, 2, 3]).unwrap();
        (train, test)
    }

    #[test]
    fn split_tasks_carry_only_their_classes_and_partition_the_data() {
        let (train, test) = toy();
        let stream =
            build_split_stream(&train, &test, &[vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(stream.len(), 2);
        for task in &stream.tasks {
            for &l in &task.train.labels {
                assert!(task.classes.contains(&l));
            }
        }
        let total: usize = stream.tasks.iter().map(|t| t.train.len()).sum();
        assert_eq!(total, train.len());
        stream.ensure_disjoint_classes().unwrap();
    }

    #[test]
    fn overlapping_groups_are_rejected() {
        let (train, test) = toy();
        let err = build_split_stream(&train, &test, &[vec![0, 1], vec![1, 2]]).unwrap_err();
        assert_eq!(err, Error::OverlappingGroups { class: 1 });
    }

    #[test]
    fn missing_class_is_rejected() {
        let (train, test) = toy();
        let err = build_split_stream(&train, &test, &[vec![0, 9]]).unwrap_err();
        assert_eq!(err, Error::MissingClass { class: 9 });
    }

    #[test]
    fn permuted_stream_identity_first_bijection_later() {
        let (train, test) = toy();
        let stream = build_permuted_stream(&train, &test, 3, 7).unwrap();
        assert_eq!(stream.tasks[0].train, train);
        for task in &stream.tasks[1..] {
            assert_eq!(task.classes, train.class_set);
            for r in 0..task.train.len() {
                let mut orig: Vec<f64> = train.inputs.row(r).to_vec();
                let mut perm: Vec<f64> = task.train.inputs.row(r).to_vec();
                orig.sort_by(f64::total_cmp);
                perm.sort_by(f64::total_cmp);
                assert_eq!(orig, perm); // pixel multiset preserved
            }
        }
        assert_ne!(stream.tasks[1].train, stream.tasks[2].train);
        // determinism
        let again = build_permuted_stream(&train, &test, 3, 7).unwrap();
        assert_eq!(stream, again);
    }

    #[test]
    fn heterogeneous_input_dims_are_rejected() {
        let a = LabeledDataset::new(Matrix::zeros(1, 2), vec![0]).unwrap();
        let b = LabeledDataset::new(Matrix::zeros(1, 3), vec![1]).unwrap();
        let err = TaskStream::new(alloc::vec![
            Task {
                id: 0,
                train: a.clone(),
                test: a,
                classes: alloc::vec![0],
            },
            Task {
                id: 1,
                train: b.clone(),
                test: b,
                classes: alloc::vec![1],
            },
        ])
        .unwrap_err();
        assert_eq!(
            err,
            Error::InputDimMismatch {
                expected: 2,
                found: 3
            }
        );
    }
}
