//! Accuracy bookkeeping across the task sequence.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `entry(l, t)` is the accuracy of task `t`'s test split after training
/// through task `l`; defined only for `t <= l`. Values may go up or down as
/// training progresses (forgetting is real); only the range is enforced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccuracyMatrix {
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new() -> AccuracyMatrix {
        AccuracyMatrix::default()
    }

    /// Appends the row measured after training task `rows.len()`; it must
    /// hold one entry per task seen so far.
    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.rows.len() + 1 {
            return Err(Error::InvalidConfig(
                "accuracy row must cover exactly the tasks seen so far",
            ));
        }
        if row.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::InvalidConfig("accuracy outside [0, 1]"));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn entry(&self, after_task: usize, task: usize) -> Option<f64> {
        self.rows.get(after_task)?.get(task).copied()
    }

    pub fn row(&self, after_task: usize) -> Option<&[f64]> {
        self.rows.get(after_task).map(|r| r.as_slice())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Average task accuracy after training `after_task + 1` tasks:
    /// `(1/l) * sum_t A[l][t]`.
    pub fn average_after(&self, after_task: usize) -> Option<f64> {
        let row = self.rows.get(after_task)?;
        Some(row.iter().sum::<f64>() / row.len() as f64)
    }

    /// Average task accuracy of the last row.
    pub fn final_average(&self) -> f64 {
        self.rows
            .len()
            .checked_sub(1)
            .and_then(|l| self.average_after(l))
            .unwrap_or(0.0)
    }
}

/// Per-task accuracy series and the end-of-run drop `A[t][t] - A[L][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingReport {
    /// `series[t][i]` is `A[t + i][t]`: task `t`'s accuracy as training
    /// progresses from task `t` to the last task.
    pub series: Vec<Vec<f64>>,
    pub forgetting: Vec<f64>,
}

pub fn forgetting_curves(matrix: &AccuracyMatrix) -> ForgettingReport {
    let l = matrix.n_rows();
    let mut series = Vec::with_capacity(l);
    let mut forgetting = Vec::with_capacity(l);
    for t in 0..l {
        let mut s = Vec::with_capacity(l - t);
        for after in t..l {
            if let Some(a) = matrix.entry(after, t) {
                s.push(a);
            }
        }
        let drop = match (s.first(), matrix.entry(l - 1, t)) {
            (Some(&first), Some(last)) => first - last,
            _ => 0.0,
        };
        series.push(s);
        forgetting.push(drop);
    }
    ForgettingReport { series, forgetting }
}
