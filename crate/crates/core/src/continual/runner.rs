//! The per-task pipeline and evaluation loop.
//!
//! For every task after the first: sample and append the coreset, re-init
//! insignificant weights, measure activation statistics on the incoming data,
//! plan and apply growth, expand or attach the output head, train on the
//! coreset-free split against the previous posterior, then (single head)
//! replay the full coreset. The posterior snapshot taken at the end of the
//! pipeline becomes the next task's prior.
//!
//! Every random phase draws from its own purpose-scoped stream of the run
//! seed, so coresets and evaluation are reproducible from the config alone
//! (checkpoint evaluation re-derives them without replaying training).

use alloc::vec::Vec;

use crate::bnn::{
    elbo_loss, predict_classes, HeadMode, HeadRef, Optimizer, OptimizerKind, PosteriorSnapshot,
    VariationalNetwork,
};
use crate::bnn::{accuracy, InitConfig};
use crate::continual::config::{GrowthSetting, OptimizerChoice, ScenarioConfig};
use crate::continual::coreset::{split_train_coreset, Coreset};
use crate::continual::metrics::AccuracyMatrix;
use crate::data::{LabeledDataset, TaskStream};
use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::plasticity::{
    attach_task_head_with_prior, estimate_pruned_neurons, estimate_shared,
    expand_output_single_head, grow_hidden_layers, mean_activations, mean_input,
    plan_growth_resource, plan_growth_vip, prune_and_reinit, task_distance, GrowthPlan,
    InputMeanTracker, PruneReport,
};

// Purpose tags for seed substreams.
const STREAM_INIT: u64 = 0x01;
const STREAM_CORESET: u64 = 0x02;
const STREAM_PRUNE: u64 = 0x03;
const STREAM_GROW: u64 = 0x04;
const STREAM_HEAD: u64 = 0x05;
const STREAM_TRAIN: u64 = 0x06;
const STREAM_REPLAY: u64 = 0x07;
const STREAM_EVAL: u64 = 0x08;
const STREAM_EVAL_FT: u64 = 0x09;

fn stream_rng(seed: u64, purpose: u64, a: usize, b: usize) -> Rng {
    Rng::substream(
        seed,
        purpose ^ ((a as u64 + 1) << 8) ^ ((b as u64 + 1) << 36),
    )
}

fn init_config(cfg: &ScenarioConfig) -> InitConfig {
    InitConfig {
        mu_std: cfg.mu_std,
        rho_init: cfg.rho_init,
    }
}

fn optimizer_kind(cfg: &ScenarioConfig) -> OptimizerKind {
    match cfg.optimizer {
        OptimizerChoice::Sgd => OptimizerKind::Sgd,
        OptimizerChoice::Adam => OptimizerKind::adam(),
    }
}

/// Shared minibatch loop. `kl_scale = 1 / minibatches_per_epoch` so the KL
/// contributions of one epoch sum to one full-dataset KL.
fn train_loop(
    net: &mut VariationalNetwork,
    prior: &PosteriorSnapshot,
    head: HeadRef,
    data: &LabeledDataset,
    epochs: usize,
    n_mc: usize,
    cfg: &ScenarioConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let n = data.len();
    debug_assert!(n > 0);
    let n_batches = n.div_ceil(cfg.batch_size);
    let kl_scale = 1.0 / n_batches as f64;
    let mut optimizer = Optimizer::new(optimizer_kind(cfg));
    let mut indices: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        rng.shuffle(&mut indices);
        let mut epoch_loss = 0.0;
        for chunk in indices.chunks(cfg.batch_size) {
            let batch_inputs = data.inputs.select_rows(chunk);
            let batch_labels: Vec<u32> = chunk.iter().map(|&i| data.labels[i]).collect();
            let out = elbo_loss(
                net,
                &batch_inputs,
                &batch_labels,
                head,
                prior,
                n_mc,
                kl_scale,
                rng,
            )?;
            optimizer.step(net, head, &out.grads, cfg.lr)?;
            epoch_loss += out.loss;
        }
        epoch_losses.push(epoch_loss / n_batches as f64);
    }
    Ok(epoch_losses)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub snapshot: PosteriorSnapshot,
    pub epoch_losses: Vec<f64>,
}

/// Minibatch ELBO optimization of one task against `prior`; returns the
/// post-training posterior snapshot. `data` is the coreset-free split.
pub fn train_task(
    net: &mut VariationalNetwork,
    prior: &PosteriorSnapshot,
    head: HeadRef,
    data: &LabeledDataset,
    cfg: &ScenarioConfig,
    rng: &mut Rng,
) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSplit);
    }
    let epoch_losses = train_loop(net, prior, head, data, cfg.epochs, cfg.mc_train, cfg, rng)?;
    Ok(TrainReport {
        snapshot: net.snapshot(prior.task_index()),
        epoch_losses,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayScope {
    /// Single-head protocol: retrain on the union of every stored coreset.
    AllTasks,
    /// Multi-head evaluation: fine-tune a clone on one task's coreset; the
    /// original network is untouched.
    OneTask(usize),
}

/// Coreset rehearsal. `AllTasks` mutates `net` in place and returns `None`;
/// `OneTask` leaves `net` alone and returns the fine-tuned clone.
pub fn replay_coreset(
    net: &mut VariationalNetwork,
    prior: &PosteriorSnapshot,
    coreset: &Coreset,
    cfg: &ScenarioConfig,
    scope: ReplayScope,
    rng: &mut Rng,
) -> Result<Option<VariationalNetwork>> {
    match scope {
        ReplayScope::AllTasks => {
            if net.head_mode() != HeadMode::Single {
                return Err(Error::InvalidConfig(
                    "full-coreset replay requires the single-head protocol",
                ));
            }
            let union = coreset.union()?;
            train_loop(
                net,
                prior,
                HeadRef::Shared,
                &union,
                cfg.replay_epochs_or_default(),
                cfg.mc_train,
                cfg,
                rng,
            )?;
            Ok(None)
        }
        ReplayScope::OneTask(task) => {
            if net.head_mode() != HeadMode::Multi {
                return Err(Error::InvalidConfig(
                    "per-task replay is the multi-head evaluation path",
                ));
            }
            let data = coreset
                .task(task)
                .filter(|d| !d.is_empty())
                .ok_or(Error::EmptyCoresetScope)?;
            // The evaluation-time fine-tune averages `mc_eval` weight draws
            // per step: the coreset is tiny, so a low-variance gradient costs
            // little and keeps the repaired head stable.
            let mut clone = net.clone();
            train_loop(
                &mut clone,
                prior,
                HeadRef::Task(task),
                data,
                cfg.eval_finetune_epochs,
                cfg.mc_eval,
                cfg,
                rng,
            )?;
            Ok(Some(clone))
        }
    }
}

/// Per-task accuracies after training through task `upto`.
///
/// Multi-head: each task is predicted by a clone fine-tuned on that task's
/// coreset (skipped when there is nothing to fine-tune on); the persistent
/// network is never mutated. Single-head: the shared head predicts directly,
/// task-agnostically. Predictions argmax the MC-averaged softmax.
pub fn evaluate(
    net: &VariationalNetwork,
    stream: &TaskStream,
    upto: usize,
    coreset: &Coreset,
    posterior: &PosteriorSnapshot,
    cfg: &ScenarioConfig,
) -> Result<Vec<f64>> {
    let mut row = Vec::with_capacity(upto + 1);
    for (t, task) in stream.tasks.iter().enumerate().take(upto + 1) {
        let mut eval_rng = stream_rng(cfg.seed, STREAM_EVAL, upto, t);
        let acc = match net.head_mode() {
            HeadMode::Single => {
                let preds = predict_classes(
                    net,
                    &task.test.inputs,
                    HeadRef::Shared,
                    cfg.mc_eval,
                    &mut eval_rng,
                )?;
                accuracy(&preds, &task.test.labels)
            }
            HeadMode::Multi => {
                net.head(HeadRef::Task(t))?;
                let can_finetune = cfg.eval_finetune_epochs > 0
                    && coreset.task(t).map_or(false, |d| !d.is_empty());
                let preds = if can_finetune {
                    let mut ft_rng = stream_rng(cfg.seed, STREAM_EVAL_FT, upto, t);
                    let mut scratch = net.clone();
                    let tuned = replay_coreset(
                        &mut scratch,
                        posterior,
                        coreset,
                        cfg,
                        ReplayScope::OneTask(t),
                        &mut ft_rng,
                    )?
                    .expect("OneTask replay returns a clone");
                    predict_classes(
                        &tuned,
                        &task.test.inputs,
                        HeadRef::Task(t),
                        cfg.mc_eval,
                        &mut eval_rng,
                    )?
                } else {
                    predict_classes(
                        net,
                        &task.test.inputs,
                        HeadRef::Task(t),
                        cfg.mc_eval,
                        &mut eval_rng,
                    )?
                };
                accuracy(&preds, &task.test.labels)
            }
        };
        row.push(acc);
    }
    Ok(row)
}

/// Splits every task into its training split and coreset, with the same
/// seed-derived sampling `run_continual` uses; checkpoint evaluation calls
/// this instead of replaying training.
pub fn materialize_coresets(
    stream: &TaskStream,
    cfg: &ScenarioConfig,
) -> Result<Vec<(LabeledDataset, LabeledDataset)>> {
    Ok(stream
        .tasks
        .iter()
        .enumerate()
        .map(|(t, task)| {
            let mut rng = stream_rng(cfg.seed, STREAM_CORESET, t, 0);
            split_train_coreset(&task.train, cfg.coreset_size_per_task, &mut rng)
        })
        .collect())
}

/// What happened at one task boundary.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub task_id: usize,
    pub prune: Option<PruneReport>,
    pub growth: Option<GrowthPlan>,
    pub hidden_sizes_after: Vec<usize>,
    pub replayed: bool,
    /// Accuracy row measured after this task's pipeline.
    pub accuracies: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub matrix: AccuracyMatrix,
    pub tasks: Vec<TaskOutcome>,
    /// End-of-pipeline posterior per task (post-replay in single-head mode).
    pub snapshots: Vec<PosteriorSnapshot>,
    pub final_net: VariationalNetwork,
    pub coreset: Coreset,
}

/// Runs the full continual-learning pipeline over a task stream.
pub fn run_continual(stream: &TaskStream, cfg: &ScenarioConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    if stream.is_empty() {
        return Err(Error::EmptyInput("task stream"));
    }
    if cfg.head_mode == HeadMode::Multi {
        stream.ensure_disjoint_classes()?;
    }
    let init = init_config(cfg);

    let mut init_rng = stream_rng(cfg.seed, STREAM_INIT, 0, 0);
    let mut net = VariationalNetwork::new(
        stream.input_dim(),
        &cfg.hidden_sizes,
        cfg.head_mode,
        &init,
        &mut init_rng,
    )?;
    let mut prior = PosteriorSnapshot::prior_like(&net, cfg.rho_init);

    let splits = materialize_coresets(stream, cfg)?;
    let mut coreset = Coreset::new(cfg.coreset_size_per_task);
    let mut tracker = InputMeanTracker::new(stream.input_dim());
    let mut matrix = AccuracyMatrix::new();
    let mut outcomes: Vec<TaskOutcome> = Vec::with_capacity(stream.len());
    let mut snapshots: Vec<PosteriorSnapshot> = Vec::with_capacity(stream.len());

    for (t, task) in stream.tasks.iter().enumerate() {
        let (train_split, task_coreset) = splits[t].clone();
        coreset.push(task.id, task_coreset);

        let mut prune_report = None;
        let mut growth_plan = None;
        if t > 0 {
            if cfg.pruning_enabled {
                let mut prune_rng = stream_rng(cfg.seed, STREAM_PRUNE, t, 0);
                prune_report = Some(prune_and_reinit(
                    &mut net,
                    &mut prior,
                    cfg.beta,
                    &init,
                    &mut prune_rng,
                )?);
            }
            let plan = match cfg.growth {
                GrowthSetting::ResourceAccounting => {
                    let stats =
                        mean_activations(&net, &train_split.inputs, &train_split.labels, &task.classes)?;
                    let share = estimate_shared(&stats, cfg.gamma)?;
                    let deltas: Vec<usize> = match &prune_report {
                        Some(r) => r.delta_per_layer(),
                        None => alloc::vec![0; net.hidden().len()],
                    };
                    let prune_counts: Vec<usize> = deltas
                        .iter()
                        .zip(net.hidden())
                        .map(|(&d, layer)| estimate_pruned_neurons(d, layer.fan_in()))
                        .collect();
                    let req = cfg
                        .alpha_req
                        .clone()
                        .unwrap_or_else(|| cfg.hidden_sizes.clone());
                    Some(plan_growth_resource(&req, &share, &prune_counts)?)
                }
                GrowthSetting::VipScaled => {
                    let current = mean_input(&task.train.inputs)?;
                    let previous = tracker
                        .mean()
                        .ok_or(Error::EmptyInput("previous task mean"))?;
                    let phi_d = task_distance(&current, &previous)?;
                    let phi_s = prune_report
                        .as_ref()
                        .map(|r| r.pruned_fraction())
                        .unwrap_or(0.0);
                    Some(plan_growth_vip(
                        cfg.kappa,
                        phi_d,
                        phi_s,
                        net.hidden().len(),
                    )?)
                }
                GrowthSetting::Disabled => None,
            };
            if let Some(plan) = &plan {
                if !plan.is_zero() {
                    let mut grow_rng = stream_rng(cfg.seed, STREAM_GROW, t, 0);
                    grow_hidden_layers(&mut net, &mut prior, plan, &init, &mut grow_rng)?;
                }
            }
            growth_plan = plan;
        }
        tracker.add_rows(&task.train.inputs)?;

        // Output layer.
        let mut head_rng = stream_rng(cfg.seed, STREAM_HEAD, t, 0);
        let head_ref = match cfg.head_mode {
            HeadMode::Single => {
                let already: Vec<u32> = net
                    .single_head()
                    .map(|h| h.classes.clone())
                    .unwrap_or_default();
                let new_classes: Vec<u32> = task
                    .classes
                    .iter()
                    .copied()
                    .filter(|c| !already.contains(c))
                    .collect();
                let restore = snapshots.last().cloned();
                expand_output_single_head(
                    &mut net,
                    &mut prior,
                    &new_classes,
                    restore.as_ref(),
                    &init,
                    &mut head_rng,
                )?;
                HeadRef::Shared
            }
            HeadMode::Multi => {
                attach_task_head_with_prior(
                    &mut net,
                    &mut prior,
                    t,
                    &task.classes,
                    &init,
                    &mut head_rng,
                )?;
                HeadRef::Task(t)
            }
        };

        // Train on the coreset-free split.
        let mut train_rng = stream_rng(cfg.seed, STREAM_TRAIN, t, 0);
        if cfg.epochs > 0 {
            train_task(&mut net, &prior, head_ref, &train_split, cfg, &mut train_rng)?;
        }

        // Single-head rehearsal on the full coreset; the replay is anchored
        // to the post-training posterior of this task.
        let mut replayed = false;
        if cfg.head_mode == HeadMode::Single
            && cfg.coreset_size_per_task > 0
            && !coreset.is_empty()
            && cfg.replay_epochs_or_default() > 0
        {
            let replay_prior = net.snapshot(t);
            let mut replay_rng = stream_rng(cfg.seed, STREAM_REPLAY, t, 0);
            replay_coreset(
                &mut net,
                &replay_prior,
                &coreset,
                cfg,
                ReplayScope::AllTasks,
                &mut replay_rng,
            )?;
            replayed = true;
        }

        let end_snapshot = net.snapshot(t);
        let row = evaluate(&net, stream, t, &coreset, &end_snapshot, cfg)?;
        matrix.push_row(row.clone())?;
        outcomes.push(TaskOutcome {
            task_id: task.id,
            prune: prune_report,
            growth: growth_plan,
            hidden_sizes_after: net.hidden_sizes(),
            replayed,
            accuracies: row,
        });
        snapshots.push(end_snapshot.clone());
        prior = end_snapshot;
    }

    Ok(RunOutcome {
        matrix,
        tasks: outcomes,
        snapshots,
        final_net: net,
        coreset,
    })
}
