//! The `train`, `evaluate` and `stats` subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use bayescl_core::bnn::{Head, HeadMode, Heads, PosteriorSnapshot};
use bayescl_core::continual::{evaluate, materialize_coresets, run_continual, Coreset, RunOutcome};
use bayescl_core::data::TaskStream;
use bayescl_core::plasticity::{
    significant_fractions, weight_adaptation_stats, DEFAULT_ADAPTATION_THRESHOLDS,
};

use crate::checkpoint;
use crate::config::{parse_flat, preset, serialize_flat, FlatConfig, RunConfig};
use crate::report::{
    accuracy_matrix_csv, adaptation_csv, growth_csv, mean_std, prune_csv, significant_csv,
    version_string, Manifest, RunSummary, SeedSummary,
};
use crate::stream::{build_stream, load_raw_data};

/// Resolves `--config` (preset name or file path) and applies `--set` pairs.
pub fn resolve_config(config_arg: &str, sets: &[(String, String)]) -> Result<FlatConfig> {
    let mut flat = match preset(config_arg) {
        Some(p) => p,
        None => {
            let text = std::fs::read_to_string(config_arg)
                .with_context(|| format!("config `{config_arg}` is neither a preset nor a readable file"))?;
            parse_flat(&text)?
        }
    };
    for (k, v) in sets {
        flat.insert(k.clone(), v.clone());
    }
    Ok(flat)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Artifacts of one seed's run, written under `<out>/seed_<seed>/`.
fn write_seed_artifacts(
    out_dir: &Path,
    seed: u64,
    outcome: &RunOutcome,
) -> Result<Vec<String>> {
    let dir = out_dir.join(format!("seed_{seed}"));
    std::fs::create_dir_all(&dir)?;
    let mut artifacts = Vec::new();
    let rel = |name: &str| format!("seed_{seed}/{name}");

    write_text(&dir.join("accuracy_matrix.csv"), &accuracy_matrix_csv(&outcome.matrix))?;
    artifacts.push(rel("accuracy_matrix.csv"));
    write_text(&dir.join("growth.csv"), &growth_csv(&outcome.tasks))?;
    artifacts.push(rel("growth.csv"));
    write_text(&dir.join("prune.csv"), &prune_csv(&outcome.tasks))?;
    artifacts.push(rel("prune.csv"));

    if outcome.snapshots.len() >= 2 {
        let stats = weight_adaptation_stats(&outcome.snapshots, DEFAULT_ADAPTATION_THRESHOLDS)?;
        write_text(&dir.join("adaptation_stats.csv"), &adaptation_csv(&stats))?;
        artifacts.push(rel("adaptation_stats.csv"));
    }

    for snapshot in &outcome.snapshots {
        let name = format!("checkpoint_task_{}.ckpt", snapshot.task_index());
        checkpoint::save(&dir.join(&name), snapshot.network(), snapshot.task_index())?;
        artifacts.push(rel(&name));
    }
    Ok(artifacts)
}

pub struct TrainArgs {
    pub config_arg: String,
    pub sets: Vec<(String, String)>,
    pub seeds: usize,
    pub out: PathBuf,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let started = Instant::now();
    let flat = resolve_config(&args.config_arg, &args.sets)?;
    let rc = RunConfig::from_flat(&flat)?;
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let raw = load_raw_data(&rc)?;
    let seeds: Vec<u64> = (0..args.seeds as u64).map(|i| rc.core.seed + i).collect();

    let run_one = |seed: u64| -> Result<RunOutcome> {
        let stream = build_stream(&rc, raw.as_ref(), seed)?;
        let mut cfg = rc.core.clone();
        cfg.seed = seed;
        Ok(run_continual(&stream, &cfg)?)
    };

    let outcomes: Vec<(u64, RunOutcome)> = if rc.core.deterministic || seeds.len() == 1 {
        let mut v = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            v.push((seed, run_one(seed).with_context(|| format!("seed {seed}"))?));
        }
        v
    } else {
        std::thread::scope(|scope| -> Result<Vec<(u64, RunOutcome)>> {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| scope.spawn(move || (seed, run_one(seed))))
                .collect();
            let mut v = Vec::with_capacity(handles.len());
            for h in handles {
                let (seed, res) = h.join().expect("worker panicked");
                v.push((seed, res.with_context(|| format!("seed {seed}"))?));
            }
            Ok(v)
        })?
    };

    std::fs::create_dir_all(&args.out)?;
    let mut artifacts = Vec::new();
    let mut summaries = Vec::new();
    for (seed, outcome) in &outcomes {
        artifacts.extend(write_seed_artifacts(&args.out, *seed, outcome)?);
        let s = SeedSummary::from_outcome(*seed, outcome);
        println!(
            "seed {seed}: accuracy {:.4} | final hidden {:?}",
            s.average_accuracy, s.final_hidden_sizes
        );
        summaries.push(s);
    }

    let averages: Vec<f64> = summaries.iter().map(|s| s.average_accuracy).collect();
    let (mean, std) = mean_std(&averages);
    let n_layers = summaries[0].final_hidden_sizes.len();
    let mean_sizes: Vec<usize> = (0..n_layers)
        .map(|k| {
            let total: usize = summaries.iter().map(|s| s.final_hidden_sizes[k]).sum();
            ((total as f64 / summaries.len() as f64) + 0.5).floor() as usize
        })
        .collect();
    println!(
        "Accuracy: {:.4} \u{00b1} {:.4} | mean final hidden {:?}",
        mean, std, mean_sizes
    );

    let summary = RunSummary {
        version: version_string(),
        config: flat.clone(),
        seeds: seeds.clone(),
        runs: summaries,
        mean_accuracy: mean,
        std_accuracy: std,
        mean_final_hidden_sizes: mean_sizes,
    };
    write_text(
        &args.out.join("summary.json"),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    artifacts.push("summary.json".into());
    write_text(&args.out.join("config.txt"), &serialize_flat(&flat))?;
    artifacts.push("config.txt".into());

    let manifest = Manifest {
        version: version_string(),
        command: "train".into(),
        config: flat,
        seeds,
        deterministic: rc.core.deterministic,
        out_dir: args.out.display().to_string(),
        artifacts,
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    write_text(
        &args.out.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Checks that the checkpoint's heads line up with the stream's tasks.
fn check_class_consistency(
    net: &bayescl_core::bnn::VariationalNetwork,
    stream: &TaskStream,
    upto: usize,
) -> Result<()> {
    match net.heads() {
        Heads::Multi(map) => {
            for t in 0..=upto {
                let head: &Head = map
                    .get(&t)
                    .with_context(|| format!("checkpoint has no head for task {t}"))?;
                if head.classes != stream.tasks[t].classes {
                    bail!(
                        "task {t}: checkpoint classes {:?} vs stream classes {:?}",
                        head.classes,
                        stream.tasks[t].classes
                    );
                }
            }
        }
        Heads::Single(head) => {
            let head = head.as_ref().context("checkpoint has no output head")?;
            let mut expected: Vec<u32> = Vec::new();
            for task in stream.tasks.iter().take(upto + 1) {
                for &c in &task.classes {
                    if !expected.contains(&c) {
                        expected.push(c);
                    }
                }
            }
            if head.classes != expected {
                bail!(
                    "checkpoint classes {:?} vs stream classes {:?}",
                    head.classes,
                    expected
                );
            }
        }
    }
    Ok(())
}

pub struct EvaluateArgs {
    pub checkpoint: PathBuf,
    pub config_arg: String,
    pub sets: Vec<(String, String)>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let flat = resolve_config(&args.config_arg, &args.sets)?;
    let rc = RunConfig::from_flat(&flat)?;
    let ck = checkpoint::load(&args.checkpoint)?;
    let raw = load_raw_data(&rc)?;
    let stream = build_stream(&rc, raw.as_ref(), rc.core.seed)?;
    let upto = ck.task_index;
    if stream.len() <= upto {
        bail!(
            "checkpoint was taken after task {upto} but the stream has only {} tasks",
            stream.len()
        );
    }
    check_class_consistency(&ck.net, &stream, upto)?;

    let splits = materialize_coresets(&stream, &rc.core)?;
    let mut coreset = Coreset::new(rc.core.coreset_size_per_task);
    for (t, (_, core)) in splits.into_iter().enumerate().take(upto + 1) {
        coreset.push(t, core);
    }
    let posterior = PosteriorSnapshot::of(&ck.net, upto);
    let row = evaluate(&ck.net, &stream, upto, &coreset, &posterior, &rc.core)?;
    for (t, acc) in row.iter().enumerate() {
        println!("task {t}: accuracy {acc:.4}");
    }
    let avg = row.iter().sum::<f64>() / row.len() as f64;
    println!("Average accuracy over {} tasks: {avg:.4}", row.len());
    Ok(())
}

pub struct StatsArgs {
    pub dir: PathBuf,
    pub out: Option<PathBuf>,
}

pub fn cmd_stats(args: &StatsArgs) -> Result<()> {
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(&args.dir)
        .with_context(|| format!("reading {}", args.dir.display()))?
    {
        let path = entry?.path();
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n,
            None => continue,
        };
        if let Some(t) = name
            .strip_prefix("checkpoint_task_")
            .and_then(|rest| rest.strip_suffix(".ckpt"))
            .and_then(|t| t.parse::<usize>().ok())
        {
            found.push((t, path));
        }
    }
    found.sort_by_key(|(t, _)| *t);
    if found.len() < 2 {
        bail!(
            "need at least 2 task-boundary checkpoints in {}, found {}",
            args.dir.display(),
            found.len()
        );
    }

    let mut snapshots = Vec::with_capacity(found.len());
    let mut fractions = Vec::with_capacity(found.len());
    for (t, path) in &found {
        let ck = checkpoint::load(path)?;
        if matches!(ck.net.head_mode(), HeadMode::Single) && ck.net.single_head().is_none() {
            bail!("checkpoint {} has no trained head", path.display());
        }
        let snap = ck.net.snapshot(*t);
        fractions.push((*t, significant_fractions(&snap, DEFAULT_ADAPTATION_THRESHOLDS.0)));
        snapshots.push(snap);
    }

    let stats = weight_adaptation_stats(&snapshots, DEFAULT_ADAPTATION_THRESHOLDS)?;
    let out_dir = args.out.clone().unwrap_or_else(|| args.dir.clone());
    std::fs::create_dir_all(&out_dir)?;
    let adaptation_path = out_dir.join("adaptation_stats.csv");
    write_text(&adaptation_path, &adaptation_csv(&stats))?;
    let significant_path = out_dir.join("significant_weights.csv");
    write_text(
        &significant_path,
        &significant_csv(&fractions, DEFAULT_ADAPTATION_THRESHOLDS.0),
    )?;
    println!("wrote {}", adaptation_path.display());
    println!("wrote {}", significant_path.display());
    Ok(())
}
