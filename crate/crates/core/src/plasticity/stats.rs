//! Activation and weight-adaptation statistics.

use alloc::vec::Vec;

use libm::fabs;

use crate::bnn::PosteriorSnapshot;
use crate::bnn::VariationalNetwork;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::plasticity::prune::snr;

/// Per-layer mean post-activations: one column per considered class, one row
/// per neuron. Computed with the deterministic mean-only forward pass.
#[derive(Debug, Clone)]
pub struct ActivationStats {
    pub classes: Vec<u32>,
    /// `layers[k]` has shape `(neurons_in_layer_k, classes.len())`.
    pub layers: Vec<Matrix>,
}

/// Mean post-activation of every hidden neuron for every listed class.
pub fn mean_activations(
    net: &VariationalNetwork,
    inputs: &Matrix,
    labels: &[u32],
    classes: &[u32],
) -> Result<ActivationStats> {
    if classes.is_empty() {
        return Err(Error::EmptyInput("classes"));
    }
    if inputs.rows() != labels.len() {
        return Err(Error::CountMismatch {
            inputs: inputs.rows(),
            labels: labels.len(),
        });
    }
    let acts = net.hidden_mean_activations(inputs)?;
    let mut layers: Vec<Matrix> = acts
        .iter()
        .map(|a| Matrix::zeros(a.cols(), classes.len()))
        .collect();
    for (j, &class) in classes.iter().enumerate() {
        let rows: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if rows.is_empty() {
            return Err(Error::EmptyClass { class });
        }
        let scale = 1.0 / rows.len() as f64;
        for (k, a) in acts.iter().enumerate() {
            for neuron in 0..a.cols() {
                let mut sum = 0.0;
                for &r in &rows {
                    sum += a.get(r, neuron);
                }
                layers[k].set(neuron, j, sum * scale);
            }
        }
    }
    Ok(ActivationStats {
        classes: classes.to_vec(),
        layers,
    })
}

/// Counts, per layer, the neurons whose average pairwise distance between
/// per-class mean activations exceeds `gamma`:
///
/// `(2 / (tc (tc - 1))) * sum_{i<j} |phi_i - phi_j| > gamma`
///
/// Such neurons already discriminate between the considered classes, so their
/// representation counts as shared capacity for the incoming task.
pub fn estimate_shared(stats: &ActivationStats, gamma: f64) -> Result<Vec<usize>> {
    let tc = stats.classes.len();
    if tc < 2 {
        return Err(Error::TooFewClasses { found: tc });
    }
    let norm = 2.0 / (tc as f64 * (tc - 1) as f64);
    let mut out = Vec::with_capacity(stats.layers.len());
    for layer in &stats.layers {
        let mut count = 0;
        for neuron in 0..layer.rows() {
            let phi = layer.row(neuron);
            let mut sum = 0.0;
            for i in 0..tc {
                for j in (i + 1)..tc {
                    sum += fabs(phi[i] - phi[j]);
                }
            }
            if norm * sum > gamma {
                count += 1;
            }
        }
        out.push(count);
    }
    Ok(out)
}

/// Default SNR bin edges: high significance above `0.01`, negligible below
/// `1e-5`, the middle band between.
pub const DEFAULT_ADAPTATION_THRESHOLDS: (f64, f64) = (0.01, 1e-5);

pub const ADAPTATION_BIN_LABELS: [&str; 3] =
    ["snr_gt_hi", "snr_between", "snr_lt_lo"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStat {
    pub count: usize,
    pub mean_abs_delta_mu: f64,
}

impl BinStat {
    /// `log10` of the mean adaptation; `-inf` marks an exactly-zero bin.
    pub fn log10_mean(&self) -> f64 {
        if self.mean_abs_delta_mu > 0.0 {
            libm::log10(self.mean_abs_delta_mu)
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransitionStats {
    /// Index of the later snapshot of the pair.
    pub to_task: usize,
    /// One `[high, middle, low]` triple per hidden layer.
    pub layers: Vec<[BinStat; 3]>,
}

#[derive(Debug, Clone)]
pub struct AdaptationStats {
    pub thresholds: (f64, f64),
    pub transitions: Vec<TransitionStats>,
}

/// Mean `|delta mu|` between consecutive snapshots, binned by each weight's
/// SNR in the first snapshot. Only positions that exist in the first snapshot
/// participate; growth appends rows and columns, so those positions stay
/// addressable in every later snapshot.
pub fn weight_adaptation_stats(
    snapshots: &[PosteriorSnapshot],
    thresholds: (f64, f64),
) -> Result<AdaptationStats> {
    if snapshots.len() < 2 {
        return Err(Error::NotEnoughSnapshots {
            found: snapshots.len(),
        });
    }
    let (hi, lo) = thresholds;
    let first = snapshots[0].network();
    let n_layers = first.hidden().len();
    for snap in snapshots {
        if snap.network().hidden().len() != n_layers {
            return Err(Error::PlanLayerMismatch {
                plan_layers: snap.network().hidden().len(),
                net_layers: n_layers,
            });
        }
    }

    let base_snr: Vec<Matrix> = first
        .hidden()
        .iter()
        .map(|l| snr(&l.weights))
        .collect();

    let mut transitions = Vec::with_capacity(snapshots.len() - 1);
    for w in snapshots.windows(2) {
        let (prev, next) = (w[0].network(), w[1].network());
        let mut layers = Vec::with_capacity(n_layers);
        for k in 0..n_layers {
            let base = &base_snr[k];
            let pw = &prev.hidden()[k].weights.mu;
            let nw = &next.hidden()[k].weights.mu;
            let mut sums = [0.0f64; 3];
            let mut counts = [0usize; 3];
            for r in 0..base.rows() {
                for c in 0..base.cols() {
                    let s = base.get(r, c);
                    let bin = if s > hi {
                        0
                    } else if s < lo {
                        2
                    } else {
                        1
                    };
                    sums[bin] += fabs(nw.get(r, c) - pw.get(r, c));
                    counts[bin] += 1;
                }
            }
            let mut triple = [BinStat {
                count: 0,
                mean_abs_delta_mu: 0.0,
            }; 3];
            for b in 0..3 {
                triple[b] = BinStat {
                    count: counts[b],
                    mean_abs_delta_mu: if counts[b] > 0 {
                        sums[b] / counts[b] as f64
                    } else {
                        0.0
                    },
                };
            }
            layers.push(triple);
        }
        transitions.push(TransitionStats {
            to_task: w[1].task_index(),
            layers,
        });
    }
    Ok(AdaptationStats {
        thresholds,
        transitions,
    })
}

/// Per hidden layer, the fraction of weights with SNR above `threshold`.
pub fn significant_fractions(snapshot: &PosteriorSnapshot, threshold: f64) -> Vec<f64> {
    snapshot
        .network()
        .hidden()
        .iter()
        .map(|l| {
            let scores = snr(&l.weights);
            let total = scores.len();
            if total == 0 {
                return 0.0;
            }
            let hits = scores.data().iter().filter(|&&s| s > threshold).count();
            hits as f64 / total as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::{HeadMode, InitConfig, VariationalNetwork};
    use crate::numerics::Rng;

    fn init() -> InitConfig {
        InitConfig {
            mu_std: 0.1,
            rho_init: -6.0,
        }
    }

    #[test]
    fn zero_network_has_zero_activations() {
        let mut rng = Rng::new(1);
        let zero = InitConfig {
            mu_std: 0.0,
            rho_init: -6.0,
        };
        let net = VariationalNetwork::new(2, &[3], HeadMode::Single, &zero, &mut rng).unwrap();
        let x = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let stats = mean_activations(&net, &x, &[0, 1], &[0, 1]).unwrap();
        assert!(stats.layers[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_neuron_reports_per_class_feature_means() {
        let mut rng = Rng::new(1);
        let zero = InitConfig {
            mu_std: 0.0,
            rho_init: -6.0,
        };
        let mut net = VariationalNetwork::new(2, &[2], HeadMode::Single, &zero, &mut rng).unwrap();
        net.hidden_mut()[0].weights.mu = Matrix::identity(2);
        // 4-sample toy set: class 0 features (1,0)/(3,0), class 1 (5,2)/(7,4)
        let x = Matrix::from_rows(&[&[1.0, 0.0], &[3.0, 0.0], &[5.0, 2.0], &[7.0, 4.0]]).unwrap();
        let labels = [0, 0, 1, 1];
        let stats = mean_activations(&net, &x, &labels, &[0, 1]).unwrap();
        let layer = &stats.layers[0];
        assert_eq!(layer.get(0, 0), 2.0); // neuron 0 = feature 0: mean(1,3)
        assert_eq!(layer.get(0, 1), 6.0); // mean(5,7)
        assert_eq!(layer.get(1, 0), 0.0);
        assert_eq!(layer.get(1, 1), 3.0);
    }

    #[test]
    fn missing_class_is_reported_by_name() {
        let mut rng = Rng::new(1);
        let net = VariationalNetwork::new(2, &[2], HeadMode::Single, &init(), &mut rng).unwrap();
        let x = Matrix::from_rows(&[&[1.0, 0.0]]).unwrap();
        let err = mean_activations(&net, &x, &[0], &[0, 7]).unwrap_err();
        assert_eq!(err, Error::EmptyClass { class: 7 });
    }

    #[test]
    fn shared_estimation_matches_hand_cases() {
        // one neuron, phi = (0, 1): average distance 1
        let stats = ActivationStats {
            classes: vec![0, 1],
            layers: vec![Matrix::from_rows(&[&[0.0, 1.0]]).unwrap()],
        };
        assert_eq!(estimate_shared(&stats, 0.5).unwrap(), vec![1]);
        assert_eq!(estimate_shared(&stats, 1.0).unwrap(), vec![0]); // strict >

        // phi = (0, 1, 2): average = 4/3
        let stats = ActivationStats {
            classes: vec![0, 1, 2],
            layers: vec![Matrix::from_rows(&[&[0.0, 1.0, 2.0]]).unwrap()],
        };
        assert_eq!(estimate_shared(&stats, 4.0 / 3.0 - 1e-12).unwrap(), vec![1]);
        assert_eq!(estimate_shared(&stats, 4.0 / 3.0 + 1e-12).unwrap(), vec![0]);

        // identical activations never count as shared for positive gamma
        let stats = ActivationStats {
            classes: vec![0, 1, 2],
            layers: vec![Matrix::from_rows(&[&[0.7, 0.7, 0.7]]).unwrap()],
        };
        assert_eq!(estimate_shared(&stats, 1e-9).unwrap(), vec![0]);
    }

    #[test]
    fn shared_estimation_needs_two_classes() {
        let stats = ActivationStats {
            classes: vec![3],
            layers: vec![Matrix::zeros(1, 1)],
        };
        assert_eq!(
            estimate_shared(&stats, 0.1).unwrap_err(),
            Error::TooFewClasses { found: 1 }
        );
    }

    #[test]
    fn shared_estimation_is_invariant_to_class_and_neuron_order() {
        let mut rng = Rng::new(9);
        let phi = rng.uniform_matrix(5, 4);
        let stats = ActivationStats {
            classes: vec![0, 1, 2, 3],
            layers: vec![phi.clone()],
        };
        let base = estimate_shared(&stats, 0.3).unwrap();

        // permute classes (columns) and neurons (rows)
        let col_perm = [2usize, 0, 3, 1];
        let row_perm = [4usize, 2, 0, 1, 3];
        let mut permuted = Matrix::zeros(5, 4);
        for (new_r, &old_r) in row_perm.iter().enumerate() {
            for (new_c, &old_c) in col_perm.iter().enumerate() {
                permuted.set(new_r, new_c, phi.get(old_r, old_c));
            }
        }
        let stats_p = ActivationStats {
            classes: vec![0, 1, 2, 3],
            layers: vec![permuted],
        };
        assert_eq!(base, estimate_shared(&stats_p, 0.3).unwrap());
    }

    #[test]
    fn identical_snapshots_have_zero_adaptation_with_neg_inf_marker() {
        let mut rng = Rng::new(2);
        let net = VariationalNetwork::new(3, &[4], HeadMode::Single, &init(), &mut rng).unwrap();
        let snaps = vec![net.snapshot(0), net.snapshot(1)];
        let stats = weight_adaptation_stats(&snaps, DEFAULT_ADAPTATION_THRESHOLDS).unwrap();
        for tr in &stats.transitions {
            for layer in &tr.layers {
                for bin in layer {
                    assert_eq!(bin.mean_abs_delta_mu, 0.0);
                    assert_eq!(bin.log10_mean(), f64::NEG_INFINITY);
                }
            }
        }
    }

    #[test]
    fn single_moved_weight_lands_in_its_bin_with_log10() {
        let mut rng = Rng::new(2);
        let zero = InitConfig {
            mu_std: 0.0,
            rho_init: 0.0, // sigma = 1 -> snr = |mu|
        };
        let mut net = VariationalNetwork::new(1, &[1], HeadMode::Single, &zero, &mut rng).unwrap();
        net.hidden_mut()[0].weights.mu.set(0, 0, 0.5); // snr 0.5 -> high bin
        let s0 = net.snapshot(0);
        net.hidden_mut()[0].weights.mu.set(0, 0, 0.6); // moved by 0.1
        let s1 = net.snapshot(1);
        let stats =
            weight_adaptation_stats(&[s0, s1], DEFAULT_ADAPTATION_THRESHOLDS).unwrap();
        let high = &stats.transitions[0].layers[0][0];
        assert_eq!(high.count, 1);
        assert!((high.mean_abs_delta_mu - 0.1).abs() < 1e-12);
        assert!((high.log10_mean() + 1.0).abs() < 1e-10);
    }

    #[test]
    fn needs_at_least_two_snapshots() {
        let mut rng = Rng::new(2);
        let net = VariationalNetwork::new(3, &[4], HeadMode::Single, &init(), &mut rng).unwrap();
        let err =
            weight_adaptation_stats(&[net.snapshot(0)], DEFAULT_ADAPTATION_THRESHOLDS)
                .unwrap_err();
        assert_eq!(err, Error::NotEnoughSnapshots { found: 1 });
    }
}
