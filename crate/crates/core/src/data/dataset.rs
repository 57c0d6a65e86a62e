//! Labeled datasets.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// A classification dataset: one input row per sample plus class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub inputs: Matrix,
    pub labels: Vec<u32>,
    /// Sorted unique labels present in the data.
    pub class_set: Vec<u32>,
}

impl LabeledDataset {
    pub fn new(inputs: Matrix, labels: Vec<u32>) -> Result<LabeledDataset> {
        if inputs.rows() != labels.len() {
            return Err(Error::CountMismatch {
                inputs: inputs.rows(),
                labels: labels.len(),
            });
        }
        let mut class_set = labels.clone();
        class_set.sort_unstable();
        class_set.dedup();
        Ok(LabeledDataset {
            inputs,
            labels,
            class_set,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    /// New dataset containing the listed rows, in the listed order.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        let inputs = self.inputs.select_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        LabeledDataset::new(inputs, labels).expect("select preserves row/label pairing")
    }

    /// Rows whose label is in `classes`.
    pub fn filter_classes(&self, classes: &[u32]) -> LabeledDataset {
        let indices: Vec<usize> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| classes.contains(l))
            .map(|(i, _)| i)
            .collect();
        self.select(&indices)
    }

    /// Concatenates datasets with identical input dimensions.
    pub fn concat(parts: &[&LabeledDataset]) -> Result<LabeledDataset> {
        let non_empty: Vec<&&LabeledDataset> = parts.iter().filter(|d| !d.is_empty()).collect();
        let first = non_empty.first().ok_or(Error::EmptyInput("concat"))?;
        let dim = first.input_dim();
        let total: usize = non_empty.iter().map(|d| d.len()).sum();
        let mut inputs = Matrix::zeros(total, dim);
        let mut labels = Vec::with_capacity(total);
        let mut row = 0;
        for d in &non_empty {
            if d.input_dim() != dim {
                return Err(Error::InputDimMismatch {
                    expected: dim,
                    found: d.input_dim(),
                });
            }
            for r in 0..d.len() {
                inputs.row_mut(row).copy_from_slice(d.inputs.row(r));
                row += 1;
            }
            labels.extend_from_slice(&d.labels);
        }
        LabeledDataset::new(inputs, labels)
    }
}

/// Caps the number of samples per class, selecting uniformly at random
/// without replacement and preserving the original row order of the kept
/// samples. `cap = 0` disables the cap.
pub fn subsample_per_class(ds: &LabeledDataset, cap: usize, rng: &mut Rng) -> LabeledDataset {
    if cap == 0 {
        return ds.clone();
    }
    let mut keep: Vec<usize> = Vec::new();
    for &class in &ds.class_set {
        let mut rows: Vec<usize> = ds
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        rng.shuffle(&mut rows);
        rows.truncate(cap);
        keep.extend(rows);
    }
    keep.sort_unstable();
    ds.select(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabeledDataset {
        LabeledDataset::new(
            Matrix::from_rows(&[&[0.0], &[1.0], &[2.0], &[3.0], &[4.0], &[5.0]]).unwrap(),
            vec![0, 1, 0, 1, 0, 1],
        )
        .unwrap()
    }

    #[test]
    fn class_set_is_sorted_unique() {
        let ds = LabeledDataset::new(
            Matrix::from_rows(&[&[0.0], &[1.0], &[2.0]]).unwrap(),
            vec![5, 2, 5],
        )
        .unwrap();
        assert_eq!(ds.class_set, vec![2, 5]);
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let err = LabeledDataset::new(Matrix::zeros(2, 1), vec![0]).unwrap_err();
        assert_eq!(
            err,
            Error::CountMismatch {
                inputs: 2,
                labels: 1
            }
        );
    }

    #[test]
    fn filter_and_concat_round_trip() {
        let ds = toy();
        let zeros = ds.filter_classes(&[0]);
        let ones = ds.filter_classes(&[1]);
        assert_eq!(zeros.len() + ones.len(), ds.len());
        let merged = LabeledDataset::concat(&[&zeros, &ones]).unwrap();
        assert_eq!(merged.len(), ds.len());
        assert_eq!(merged.class_set, vec![0, 1]);
    }

    #[test]
    fn subsample_caps_each_class_deterministically() {
        let ds = toy();
        let mut rng = Rng::new(4);
        let small = subsample_per_class(&ds, 2, &mut rng);
        assert_eq!(small.len(), 4);
        for &class in &[0u32, 1] {
            assert_eq!(small.labels.iter().filter(|&&l| l == class).count(), 2);
        }
        let mut rng2 = Rng::new(4);
        assert_eq!(small, subsample_per_class(&ds, 2, &mut rng2));
        // cap 0 disables
        let mut rng3 = Rng::new(4);
        assert_eq!(subsample_per_class(&ds, 0, &mut rng3), ds);
    }
}
