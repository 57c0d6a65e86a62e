//! Task-stream construction from a run configuration.

use anyhow::{bail, Context, Result};
use bayescl_core::data::{
    build_permuted_stream, build_split_stream, build_synthetic_stream, subsample_per_class,
    LabeledDataset, SyntheticConfig, TaskStream, MNIST_SPLIT_GROUPS,
};
use bayescl_core::numerics::Rng;

use crate::config::{RunConfig, Scenario};

// Substream tag for the per-class subsampling draw.
const STREAM_SUBSAMPLE: u64 = 0x5AB5;

/// Loads the raw MNIST pair when the scenario needs it. Loading once and
/// sharing across seeds keeps the memory peak at one copy.
pub fn load_raw_data(rc: &RunConfig) -> Result<Option<(LabeledDataset, LabeledDataset)>> {
    match rc.scenario {
        Scenario::Synthetic => Ok(None),
        Scenario::SplitMnist | Scenario::PermutedMnist => {
            let pair = crate::idx::load_mnist(&rc.data.data_dir).with_context(|| {
                format!(
                    "loading MNIST from `{}` (override with `data_dir`)",
                    rc.data.data_dir.display()
                )
            })?;
            Ok(Some(pair))
        }
    }
}

/// Builds the task stream for one run seed. Everything seed-dependent
/// (subsampling, permutations, synthetic draws) derives from `seed`, so a
/// later `evaluate` with the same config reconstructs the identical stream.
pub fn build_stream(
    rc: &RunConfig,
    raw: Option<&(LabeledDataset, LabeledDataset)>,
    seed: u64,
) -> Result<TaskStream> {
    let stream = match rc.scenario {
        Scenario::Synthetic => build_synthetic_stream(&SyntheticConfig {
            n_tasks: rc.data.n_tasks,
            classes_per_task: rc.data.classes_per_task,
            dim: rc.data.synthetic_dim,
            separation: rc.data.synthetic_separation,
            n_per_class: rc.data.synthetic_n_per_class,
            seed,
        })?,
        Scenario::SplitMnist | Scenario::PermutedMnist => {
            let (train, test) = raw.context("MNIST data not loaded")?;
            let train = if rc.data.subsample_per_class > 0 {
                let mut rng = Rng::substream(seed, STREAM_SUBSAMPLE);
                subsample_per_class(train, rc.data.subsample_per_class, &mut rng)
            } else {
                train.clone()
            };
            match rc.scenario {
                Scenario::SplitMnist => {
                    let groups: Vec<Vec<u32>> =
                        MNIST_SPLIT_GROUPS.iter().map(|g| g.to_vec()).collect();
                    build_split_stream(&train, test, &groups)?
                }
                Scenario::PermutedMnist => {
                    if rc.data.n_tasks == 0 {
                        bail!("permuted_mnist needs n_tasks >= 1");
                    }
                    build_permuted_stream(&train, test, rc.data.n_tasks, seed)?
                }
                Scenario::Synthetic => unreachable!(),
            }
        }
    };
    Ok(stream)
}
