//! Single-head output expansion with bias mitigation.
//!
//! Appending untrained class rows next to well-trained ones biases both the
//! backward pass and the predictions toward the newest task. The protocol
//! here re-initializes the whole output layer before each task and restores
//! the rows of previously seen classes from the posterior taken right after
//! the previous task's coreset replay.


use crate::bnn::{
    Activation, GaussianParam, Head, HeadMode, InitConfig, PosteriorSnapshot, VariationalLayer,
    VariationalNetwork,
};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Grows the shared head by `new_classes`, re-initializes every output
/// weight, then overwrites the rows of previously seen classes with the
/// values from `restore_from` (the post-replay snapshot of the previous
/// task). The prior's head is extended with fresh-init prior rows for the new
/// classes, its old rows untouched.
///
/// On the first task (`net` has no head yet) this is plain initialization and
/// `restore_from` is ignored.
pub fn expand_output_single_head(
    net: &mut VariationalNetwork,
    prior: &mut PosteriorSnapshot,
    new_classes: &[u32],
    restore_from: Option<&PosteriorSnapshot>,
    init: &InitConfig,
    rng: &mut Rng,
) -> Result<()> {
    if net.head_mode() != HeadMode::Single {
        return Err(Error::InvalidConfig(
            "single-head expansion on a multi-head network",
        ));
    }
    let fan_in = net
        .hidden()
        .last()
        .map(|l| l.fan_out())
        .ok_or(Error::InvalidConfig("network has no hidden layers"))?;

    let existing = net.single_head().cloned();
    match existing {
        None => {
            // First task: plain initialization of all rows.
            if new_classes.is_empty() {
                return Err(Error::EmptyInput("head classes"));
            }
            let layer =
                VariationalLayer::init(new_classes.len(), fan_in, Activation::Identity, init, rng);
            net.set_single_head(Head {
                layer,
                classes: new_classes.to_vec(),
            })?;
            prior.network_mut().set_single_head(Head {
                layer: VariationalLayer {
                    weights: GaussianParam::prior(new_classes.len(), fan_in, init.rho_init),
                    biases: GaussianParam::prior(new_classes.len(), 1, init.rho_init),
                    activation: Activation::Identity,
                },
                classes: new_classes.to_vec(),
            })?;
        }
        Some(old_head) => {
            let snapshot =
                restore_from.ok_or(Error::SnapshotMismatch("missing restore snapshot"))?;
            let snap_head = snapshot
                .network()
                .single_head()
                .ok_or(Error::SnapshotMismatch("restore snapshot has no head"))?;
            if snap_head.classes != old_head.classes {
                return Err(Error::SnapshotMismatch(
                    "restore snapshot does not cover the previously seen classes",
                ));
            }
            let snap_fan_in = snap_head.layer.fan_in();
            if snap_fan_in > fan_in {
                return Err(Error::SnapshotMismatch(
                    "restore snapshot is wider than the current network",
                ));
            }
            for &c in new_classes {
                if old_head.classes.contains(&c) {
                    return Err(Error::ClassCollision { class: c });
                }
            }

            let old_count = old_head.classes.len();
            let total = old_count + new_classes.len();

            // Full re-initialization of the expanded head...
            let mut layer =
                VariationalLayer::init(total, fan_in, Activation::Identity, init, rng);
            // ...then the old-class rows come back from the snapshot. Columns
            // the snapshot does not have (hidden growth since the replay) are
            // zeroed so new neurons start with no influence on old classes.
            for r in 0..old_count {
                for c in 0..fan_in {
                    let (mu, rho) = if c < snap_fan_in {
                        (
                            snap_head.layer.weights.mu.get(r, c),
                            snap_head.layer.weights.rho.get(r, c),
                        )
                    } else {
                        (0.0, init.rho_init)
                    };
                    layer.weights.mu.set(r, c, mu);
                    layer.weights.rho.set(r, c, rho);
                }
                layer.biases.mu.set(r, 0, snap_head.layer.biases.mu.get(r, 0));
                layer.biases.rho.set(r, 0, snap_head.layer.biases.rho.get(r, 0));
            }
            let mut classes = old_head.classes.clone();
            classes.extend_from_slice(new_classes);
            net.set_single_head(Head { layer, classes: classes.clone() })?;

            // Prior head: keep old rows, append fresh-init prior rows.
            let prior_head = prior
                .network()
                .single_head()
                .ok_or(Error::SnapshotMismatch("prior has no head"))?
                .clone();
            if prior_head.layer.fan_in() != fan_in {
                return Err(Error::SnapshotMismatch(
                    "prior head width does not match the network",
                ));
            }
            let mut p_w_mu = prior_head.layer.weights.mu.data().to_vec();
            let mut p_w_rho = prior_head.layer.weights.rho.data().to_vec();
            p_w_mu.extend(core::iter::repeat(0.0).take(new_classes.len() * fan_in));
            p_w_rho.extend(core::iter::repeat(init.rho_init).take(new_classes.len() * fan_in));
            let mut p_b_mu = prior_head.layer.biases.mu.data().to_vec();
            let mut p_b_rho = prior_head.layer.biases.rho.data().to_vec();
            p_b_mu.extend(core::iter::repeat(0.0).take(new_classes.len()));
            p_b_rho.extend(core::iter::repeat(init.rho_init).take(new_classes.len()));
            prior.network_mut().set_single_head(Head {
                layer: VariationalLayer {
                    weights: GaussianParam::new(
                        Matrix::from_vec(total, fan_in, p_w_mu).expect("prior head weights"),
                        Matrix::from_vec(total, fan_in, p_w_rho).expect("prior head weights"),
                    )?,
                    biases: GaussianParam::new(
                        Matrix::from_vec(total, 1, p_b_mu).expect("prior head biases"),
                        Matrix::from_vec(total, 1, p_b_rho).expect("prior head biases"),
                    )?,
                    activation: Activation::Identity,
                },
                classes,
            })?;
        }
    }
    net.validate_chaining()?;
    prior.network().validate_chaining()?;
    Ok(())
}

/// Attaches a fresh task head to both the network and the prior snapshot
/// (multi-head protocol).
pub fn attach_task_head_with_prior(
    net: &mut VariationalNetwork,
    prior: &mut PosteriorSnapshot,
    task: usize,
    classes: &[u32],
    init: &InitConfig,
    rng: &mut Rng,
) -> Result<()> {
    net.attach_task_head(task, classes, init, rng)?;
    let fan_in = net.hidden().last().map(|l| l.fan_out()).unwrap_or(0);
    let zero = InitConfig {
        mu_std: 0.0,
        rho_init: init.rho_init,
    };
    // Drawing nothing from rng: the prior head is deterministic zeros.
    let mut silent = Rng::new(0);
    prior
        .network_mut()
        .attach_task_head(task, classes, &zero, &mut silent)?;
    debug_assert_eq!(
        prior
            .network()
            .head(crate::bnn::HeadRef::Task(task))
            .map(|h| h.layer.fan_in()),
        Ok(fan_in)
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::{ForwardMode, HeadRef};

    fn init() -> InitConfig {
        InitConfig {
            mu_std: 0.1,
            rho_init: -6.0,
        }
    }

    fn fresh_net(rng: &mut Rng) -> (VariationalNetwork, PosteriorSnapshot) {
        let net = VariationalNetwork::new(3, &[4], HeadMode::Single, &init(), rng).unwrap();
        let prior = PosteriorSnapshot::prior_like(&net, -6.0);
        (net, prior)
    }

    #[test]
    fn first_task_is_plain_initialization() {
        let mut rng = Rng::new(20);
        let (mut net, mut prior) = fresh_net(&mut rng);
        expand_output_single_head(&mut net, &mut prior, &[0, 1], None, &init(), &mut rng).unwrap();
        let head = net.single_head().unwrap();
        assert_eq!(head.classes, vec![0, 1]);
        assert_eq!(head.layer.fan_out(), 2);
        let prior_head = prior.network().single_head().unwrap();
        assert!(prior_head.layer.weights.mu.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn old_rows_come_back_bit_exact_and_new_rows_are_fresh() {
        let mut rng = Rng::new(21);
        let (mut net, mut prior) = fresh_net(&mut rng);
        expand_output_single_head(&mut net, &mut prior, &[0, 1], None, &init(), &mut rng).unwrap();
        // pretend training moved the head somewhere recognizable
        {
            let head = net.head_mut(HeadRef::Shared).unwrap();
            head.layer.weights.mu = Matrix::filled(2, 4, 0.75);
            head.layer.biases.mu = Matrix::filled(2, 1, -0.25);
        }
        let snapshot = net.snapshot(0);

        expand_output_single_head(
            &mut net,
            &mut prior,
            &[2, 3],
            Some(&snapshot),
            &init(),
            &mut rng,
        )
        .unwrap();
        let head = net.single_head().unwrap();
        assert_eq!(head.classes, vec![0, 1, 2, 3]);
        for c in 0..4 {
            assert_eq!(head.layer.weights.mu.get(0, c), 0.75);
            assert_eq!(head.layer.weights.mu.get(1, c), 0.75);
            assert_ne!(head.layer.weights.mu.get(2, c), 0.75);
        }
        assert_eq!(head.layer.biases.mu.get(0, 0), -0.25);
        // fresh rows carry the init rho
        assert_eq!(head.layer.weights.rho.get(3, 2), -6.0);
        // prior gained fresh-init rows for new classes
        let prior_head = prior.network().single_head().unwrap();
        assert_eq!(prior_head.layer.fan_out(), 4);
        assert!(prior_head.layer.weights.mu.row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_new_classes_restores_snapshot_exactly() {
        let mut rng = Rng::new(22);
        let (mut net, mut prior) = fresh_net(&mut rng);
        expand_output_single_head(&mut net, &mut prior, &[0, 1], None, &init(), &mut rng).unwrap();
        {
            let head = net.head_mut(HeadRef::Shared).unwrap();
            head.layer.weights.mu = Matrix::filled(2, 4, 0.33);
        }
        let snapshot = net.snapshot(0);
        expand_output_single_head(&mut net, &mut prior, &[], Some(&snapshot), &init(), &mut rng)
            .unwrap();
        assert_eq!(
            net.single_head().unwrap().layer,
            snapshot.network().single_head().unwrap().layer
        );
    }

    #[test]
    fn old_class_logits_match_snapshot_after_expansion() {
        let mut rng = Rng::new(23);
        let (mut net, mut prior) = fresh_net(&mut rng);
        expand_output_single_head(&mut net, &mut prior, &[0, 1], None, &init(), &mut rng).unwrap();
        let snapshot = net.snapshot(0);
        let x = Matrix::from_rows(&[&[0.4, -0.2, 1.1]]).unwrap();
        let before = snapshot
            .network()
            .forward(&x, HeadRef::Shared, ForwardMode::MeanOnly)
            .unwrap()
            .logits;

        expand_output_single_head(
            &mut net,
            &mut prior,
            &[2, 3],
            Some(&snapshot),
            &init(),
            &mut rng,
        )
        .unwrap();
        let after = net
            .forward(&x, HeadRef::Shared, ForwardMode::MeanOnly)
            .unwrap()
            .logits;
        assert_eq!(after.get(0, 0), before.get(0, 0));
        assert_eq!(after.get(0, 1), before.get(0, 1));
    }

    #[test]
    fn snapshot_class_coverage_is_checked() {
        let mut rng = Rng::new(24);
        let (mut net, mut prior) = fresh_net(&mut rng);
        expand_output_single_head(&mut net, &mut prior, &[0, 1], None, &init(), &mut rng).unwrap();
        let mut other_net = VariationalNetwork::new(3, &[4], HeadMode::Single, &init(), &mut rng)
            .unwrap();
        let mut other_prior = PosteriorSnapshot::prior_like(&other_net, -6.0);
        expand_output_single_head(
            &mut other_net,
            &mut other_prior,
            &[5, 6],
            None,
            &init(),
            &mut rng,
        )
        .unwrap();
        let wrong_snapshot = other_net.snapshot(0);
        let err = expand_output_single_head(
            &mut net,
            &mut prior,
            &[2],
            Some(&wrong_snapshot),
            &init(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SnapshotMismatch(_)));
    }
}
