//! Report artifacts: CSV time series and JSON summaries.

use std::fmt::Write as _;

use bayescl_core::continual::{AccuracyMatrix, RunOutcome, TaskOutcome};
use bayescl_core::plasticity::{AdaptationStats, GrowthPolicy};
use serde::Serialize;

/// Long-format accuracy matrix: one row per `(after_task, task)` pair.
pub fn accuracy_matrix_csv(matrix: &AccuracyMatrix) -> String {
    let mut out = String::from("after_task,task,accuracy\n");
    for l in 0..matrix.n_rows() {
        let row = matrix.row(l).unwrap();
        for (t, acc) in row.iter().enumerate() {
            let _ = writeln!(out, "{l},{t},{acc}");
        }
    }
    out
}

pub fn growth_csv(tasks: &[TaskOutcome]) -> String {
    let mut out = String::from("task,layer,alpha_req,alpha_share,alpha_prune,alpha,policy\n");
    for task in tasks {
        if let Some(plan) = &task.growth {
            let policy = match plan.policy {
                GrowthPolicy::ResourceAccounting => "resource",
                GrowthPolicy::VipScaled => "vip",
            };
            for (k, layer) in plan.layers.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{k},{},{},{},{},{policy}",
                    task.task_id, layer.alpha_req, layer.alpha_share, layer.alpha_prune,
                    layer.alpha
                );
            }
        }
    }
    out
}

pub fn prune_csv(tasks: &[TaskOutcome]) -> String {
    let mut out = String::from("task,layer,delta,total_weights,beta\n");
    for task in tasks {
        if let Some(report) = &task.prune {
            for (k, layer) in report.layers.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{k},{},{},{}",
                    task.task_id, layer.delta, layer.total, report.beta
                );
            }
        }
    }
    out
}

fn bin_label(bin: usize) -> &'static str {
    // default thresholds 0.01 / 1e-5
    match bin {
        0 => "snr_gt_1e-2",
        1 => "snr_1e-5_to_1e-2",
        _ => "snr_lt_1e-5",
    }
}

/// Schema: `task,layer,bin,mean_abs_delta_mu_log10`; a zero bin prints
/// `-inf`.
pub fn adaptation_csv(stats: &AdaptationStats) -> String {
    let mut out = String::from("task,layer,bin,mean_abs_delta_mu_log10\n");
    for tr in &stats.transitions {
        for (k, bins) in tr.layers.iter().enumerate() {
            for (b, bin) in bins.iter().enumerate() {
                let log = bin.log10_mean();
                let rendered = if log == f64::NEG_INFINITY {
                    "-inf".to_string()
                } else {
                    format!("{log}")
                };
                let _ = writeln!(out, "{},{k},{},{rendered}", tr.to_task, bin_label(b));
            }
        }
    }
    out
}

/// Fraction of significant weights (SNR above `threshold`) per task snapshot
/// and layer.
pub fn significant_csv(fractions: &[(usize, Vec<f64>)], threshold: f64) -> String {
    let mut out = String::from("task,layer,threshold,significant_fraction\n");
    for (task, layers) in fractions {
        for (k, frac) in layers.iter().enumerate() {
            let _ = writeln!(out, "{task},{k},{threshold},{frac}");
        }
    }
    out
}

#[derive(Debug, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// Final row of the accuracy matrix.
    pub final_accuracies: Vec<f64>,
    /// Average task accuracy of the final row.
    pub average_accuracy: f64,
    pub final_hidden_sizes: Vec<usize>,
    /// Pruned connections per layer, per boundary (tasks 2..).
    pub delta_per_task: Vec<Vec<usize>>,
    /// Neurons added per layer, per boundary (tasks 2..).
    pub growth_per_task: Vec<Vec<usize>>,
    /// Per-task forgetting `A[t][t] - A[L][t]`.
    pub forgetting: Vec<f64>,
}

impl SeedSummary {
    pub fn from_outcome(seed: u64, outcome: &RunOutcome) -> SeedSummary {
        let l = outcome.matrix.n_rows() - 1;
        let forgetting = bayescl_core::continual::forgetting_curves(&outcome.matrix).forgetting;
        SeedSummary {
            seed,
            final_accuracies: outcome.matrix.row(l).unwrap().to_vec(),
            average_accuracy: outcome.matrix.final_average(),
            final_hidden_sizes: outcome.final_net.hidden_sizes(),
            delta_per_task: outcome
                .tasks
                .iter()
                .filter_map(|t| t.prune.as_ref().map(|p| p.delta_per_layer()))
                .collect(),
            growth_per_task: outcome
                .tasks
                .iter()
                .filter_map(|t| t.growth.as_ref().map(|g| g.alphas()))
                .collect(),
            forgetting,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub version: String,
    pub config: std::collections::BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedSummary>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Arithmetic mean of final widths over seeds, rounded to nearest.
    pub mean_final_hidden_sizes: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config: std::collections::BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub deterministic: bool,
    pub out_dir: String,
    /// Every artifact path this run wrote, relative to `out_dir`.
    pub artifacts: Vec<String>,
    pub elapsed_seconds: f64,
}

pub fn version_string() -> String {
    format!("bayescl {}", env!("CARGO_PKG_VERSION"))
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_csv_schema() {
        let mut m = AccuracyMatrix::new();
        m.push_row(vec![1.0]).unwrap();
        m.push_row(vec![0.5, 0.25]).unwrap();
        let csv = accuracy_matrix_csv(&m);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "after_task,task,accuracy");
        assert_eq!(lines[1], "0,0,1");
        assert_eq!(lines[3], "1,1,0.25");
    }

    #[test]
    fn mean_std_hand_case() {
        let (m, s) = mean_std(&[0.8, 0.6]);
        assert!((m - 0.7).abs() < 1e-15);
        assert!((s - 0.1).abs() < 1e-12);
    }
}
