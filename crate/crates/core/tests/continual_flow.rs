//! End-to-end behavior of the training loop and the continual pipeline on
//! synthetic data.

use bayescl_core::bnn::{
    elbo_loss, HeadMode, HeadRef, InitConfig, Optimizer, OptimizerKind, PosteriorSnapshot,
    VariationalNetwork,
};
use bayescl_core::continual::{
    evaluate, run_continual, train_task, GrowthSetting, ScenarioConfig,
};
use bayescl_core::data::{build_synthetic_stream, SyntheticConfig};
use bayescl_core::numerics::Rng;
use bayescl_core::plasticity::expand_output_single_head;

fn single_head_net(
    input: usize,
    hidden: &[usize],
    classes: &[u32],
    seed: u64,
) -> (VariationalNetwork, PosteriorSnapshot) {
    let init = InitConfig {
        mu_std: 0.1,
        rho_init: -6.0,
    };
    let mut rng = Rng::new(seed);
    let mut net =
        VariationalNetwork::new(input, hidden, HeadMode::Single, &init, &mut rng).unwrap();
    let mut prior = PosteriorSnapshot::prior_like(&net, -6.0);
    expand_output_single_head(&mut net, &mut prior, classes, None, &init, &mut rng).unwrap();
    (net, prior)
}

#[test]
fn sgd_step_matches_hand_arithmetic() {
    // f(mu) = mu^2 at mu = 1: gradient 2, lr 0.1 -> mu = 0.8
    let (mut net, _) = single_head_net(2, &[1], &[0, 1], 5);
    net.hidden_mut()[0].weights.mu.set(0, 0, 1.0);
    let mut grads =
        bayescl_core::bnn::NetworkGrads::zeros_like(&net, HeadRef::Shared).unwrap();
    grads.hidden[0].weights.mu.set(0, 0, 2.0);
    let mut opt = Optimizer::new(OptimizerKind::Sgd);
    opt.step(&mut net, HeadRef::Shared, &grads, 0.1).unwrap();
    assert!((net.hidden()[0].weights.mu.get(0, 0) - 0.8).abs() < 1e-15);
}

#[test]
fn zero_learning_rate_changes_nothing() {
    for kind in [OptimizerKind::Sgd, OptimizerKind::adam()] {
        let (mut net, prior) = single_head_net(3, &[4], &[0, 1], 6);
        let mut rng = Rng::new(7);
        let inputs = rng.normal_matrix(4, 3);
        let labels = vec![0, 1, 0, 1];
        let out = elbo_loss(
            &net, &inputs, &labels, HeadRef::Shared, &prior, 1, 0.1, &mut rng,
        )
        .unwrap();
        let before = net.clone();
        let mut opt = Optimizer::new(kind);
        opt.step(&mut net, HeadRef::Shared, &out.grads, 0.0).unwrap();
        assert_eq!(net, before);
    }
}

#[test]
fn two_hundred_steps_reduce_the_loss_on_average() {
    let (mut net, prior) = single_head_net(4, &[2], &[0, 1], 11);
    let mut rng = Rng::new(12);
    let inputs = rng.normal_matrix(8, 4);
    let labels: Vec<u32> = (0..8).map(|_| rng.below(2) as u32).collect();
    let mut opt = Optimizer::new(OptimizerKind::adam());
    let mut losses = Vec::new();
    for _ in 0..200 {
        let out = elbo_loss(
            &net, &inputs, &labels, HeadRef::Shared, &prior, 1, 0.1, &mut rng,
        )
        .unwrap();
        opt.step(&mut net, HeadRef::Shared, &out.grads, 1e-2).unwrap();
        losses.push(out.loss);
    }
    let first: f64 = losses[..50].iter().sum::<f64>() / 50.0;
    let last: f64 = losses[150..].iter().sum::<f64>() / 50.0;
    assert!(
        last < first,
        "smoothed loss did not decrease: {first} -> {last}"
    );
}

fn smoke_stream(seed: u64) -> bayescl_core::data::TaskStream {
    build_synthetic_stream(&SyntheticConfig {
        n_tasks: 3,
        classes_per_task: 2,
        dim: 8,
        separation: 6.0,
        n_per_class: 100,
        seed,
    })
    .unwrap()
}

fn smoke_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        head_mode: HeadMode::Single,
        growth: GrowthSetting::ResourceAccounting,
        pruning_enabled: true,
        beta: (-2.5f64).exp(),
        gamma: 0.1,
        coreset_size_per_task: 20,
        epochs: 25,
        batch_size: 32,
        hidden_sizes: vec![16],
        seed,
        ..ScenarioConfig::default()
    }
}

#[test]
fn separable_blobs_train_to_high_accuracy() {
    let stream = smoke_stream(3);
    let task = &stream.tasks[0];
    let (mut net, prior) = single_head_net(8, &[16], &task.classes, 21);
    let mut cfg = smoke_config(1);
    cfg.epochs = 200;
    let mut rng = Rng::new(22);
    train_task(&mut net, &prior, HeadRef::Shared, &task.train, &cfg, &mut rng).unwrap();
    let preds = bayescl_core::bnn::predict_classes(
        &net,
        &task.train.inputs,
        HeadRef::Shared,
        10,
        &mut Rng::new(23),
    )
    .unwrap();
    let acc = bayescl_core::bnn::accuracy(&preds, &task.train.labels);
    assert!(acc >= 0.95, "train accuracy {acc}");
}

#[test]
fn zero_epochs_leaves_the_network_unchanged() {
    let stream = smoke_stream(4);
    let task = &stream.tasks[0];
    let (mut net, prior) = single_head_net(8, &[16], &task.classes, 31);
    let before = net.clone();
    let mut cfg = smoke_config(1);
    cfg.epochs = 0;
    let mut rng = Rng::new(32);
    let report =
        train_task(&mut net, &prior, HeadRef::Shared, &task.train, &cfg, &mut rng).unwrap();
    assert_eq!(net, before);
    assert_eq!(report.snapshot.network(), &before);
}

#[test]
fn full_run_is_deterministic_and_tracks_snapshots() {
    let stream = smoke_stream(5);
    let cfg = smoke_config(9);
    let a = run_continual(&stream, &cfg).unwrap();
    let b = run_continual(&stream, &cfg).unwrap();
    assert_eq!(a.matrix, b.matrix);
    assert_eq!(a.final_net, b.final_net);
    assert_eq!(a.snapshots.len(), 3);
    for (t, snap) in a.snapshots.iter().enumerate() {
        assert_eq!(snap.task_index(), t);
    }
    // every accuracy is defined and in range
    for l in 0..3 {
        for t in 0..=l {
            let v = a.matrix.entry(l, t).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
    // a single-task run works too (plain Bayes-by-Backprop training)
    let single = bayescl_core::data::TaskStream::new(vec![stream.tasks[0].clone()]).unwrap();
    let out = run_continual(&single, &cfg).unwrap();
    assert_eq!(out.matrix.n_rows(), 1);
}

#[test]
fn multi_head_evaluation_never_mutates_the_network() {
    let stream = smoke_stream(6);
    let cfg = ScenarioConfig {
        head_mode: HeadMode::Multi,
        eval_finetune_epochs: 3,
        ..smoke_config(13)
    };
    let out = run_continual(&stream, &cfg).unwrap();
    let net = out.final_net.clone();
    let posterior = net.snapshot(2);
    let row = evaluate(&net, &stream, 2, &out.coreset, &posterior, &cfg).unwrap();
    assert_eq!(net, out.final_net, "evaluation mutated the network");
    assert_eq!(row.len(), 3);
}

#[test]
fn coreset_replay_improves_earlier_task_accuracy() {
    // median over 3 seeds of the mean accuracy on tasks seen before the last
    let mut with_replay = Vec::new();
    let mut without_replay = Vec::new();
    for seed in [101u64, 202, 303] {
        let stream = smoke_stream(seed);
        let mut cfg = smoke_config(seed);
        cfg.growth = GrowthSetting::Disabled;
        cfg.pruning_enabled = false;
        let earlier = |m: &bayescl_core::continual::AccuracyMatrix| -> f64 {
            let row = m.row(2).unwrap();
            (row[0] + row[1]) / 2.0
        };
        let out = run_continual(&stream, &cfg).unwrap();
        with_replay.push(earlier(&out.matrix));
        cfg.coreset_size_per_task = 0;
        let out = run_continual(&stream, &cfg).unwrap();
        without_replay.push(earlier(&out.matrix));
    }
    with_replay.sort_by(f64::total_cmp);
    without_replay.sort_by(f64::total_cmp);
    assert!(
        with_replay[1] > without_replay[1],
        "replay {with_replay:?} vs none {without_replay:?}"
    );
}

#[test]
fn growth_reports_components_and_architecture_evolves_sanely() {
    let stream = smoke_stream(7);
    let cfg = smoke_config(17);
    let out = run_continual(&stream, &cfg).unwrap();
    assert!(out.tasks[0].prune.is_none());
    assert!(out.tasks[0].growth.is_none());
    for task in &out.tasks[1..] {
        let plan = task.growth.as_ref().unwrap();
        for layer in &plan.layers {
            assert_eq!(
                layer.alpha,
                layer
                    .alpha_req
                    .saturating_sub(layer.alpha_share + layer.alpha_prune)
            );
        }
        assert!(task.prune.is_some());
    }
    let final_sizes = &out.tasks.last().unwrap().hidden_sizes_after;
    assert!(final_sizes[0] >= 16 && final_sizes[0] <= 16 * 3);
}
