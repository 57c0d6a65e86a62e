//! Command-line harness for the bayescl continual-learning engine: run
//! configuration, dataset files, checkpoints and report emission.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod idx;
pub mod report;
pub mod stream;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use commands::{cmd_evaluate, cmd_stats, cmd_train, EvaluateArgs, StatsArgs, TrainArgs};

pub const USAGE: &str = "\
bayescl — continual learning for Bayesian MLPs

USAGE:
  bayescl train    --config <preset|file> [--set KEY=VALUE]... [--seeds N]
                   [--out DIR] [--deterministic] [--subsample-per-class N]
  bayescl evaluate --checkpoint FILE --config <preset|file> [--set KEY=VALUE]...
  bayescl stats    --dir DIR [--out DIR]

PRESETS:
  pmnist, mh_smnist, ta_smnist, synthetic_smoke

Config files are flat `key = value` text; `--set` overrides win.
`train` writes per-seed accuracy_matrix.csv, growth.csv, prune.csv,
adaptation_stats.csv and checkpoint_task_<t>.ckpt files plus summary.json
and manifest.json.
";

struct ArgReader {
    args: Vec<String>,
    pos: usize,
}

impl ArgReader {
    fn next_value(&mut self, flag: &str) -> Result<String> {
        self.pos += 1;
        self.args
            .get(self.pos)
            .cloned()
            .with_context(|| format!("{flag} needs a value"))
    }
}

fn parse_set(value: &str) -> Result<(String, String)> {
    let (k, v) = value
        .split_once('=')
        .with_context(|| format!("--set expects KEY=VALUE, got `{value}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Dispatches a full command line (without the binary name).
pub fn run(args: &[String]) -> Result<()> {
    let Some(command) = args.first() else {
        print!("{USAGE}");
        bail!("no command given");
    };
    if matches!(command.as_str(), "help" | "-h" | "--help") {
        print!("{USAGE}");
        return Ok(());
    }

    let mut reader = ArgReader {
        args: args.to_vec(),
        pos: 0,
    };
    let mut config_arg: Option<String> = None;
    let mut sets: Vec<(String, String)> = Vec::new();
    let mut seeds: usize = 1;
    let mut out = PathBuf::from("runs/latest");
    let mut checkpoint_path: Option<PathBuf> = None;
    let mut dir: Option<PathBuf> = None;
    let mut stats_out: Option<PathBuf> = None;

    while reader.pos + 1 < reader.args.len() {
        reader.pos += 1;
        let flag = reader.args[reader.pos].clone();
        match flag.as_str() {
            "--config" => config_arg = Some(reader.next_value("--config")?),
            "--set" => sets.push(parse_set(&reader.next_value("--set")?)?),
            "--seeds" => {
                seeds = reader
                    .next_value("--seeds")?
                    .parse()
                    .context("--seeds expects an integer")?
            }
            "--out" => {
                let v = PathBuf::from(reader.next_value("--out")?);
                out = v.clone();
                stats_out = Some(v);
            }
            "--deterministic" => sets.push(("deterministic".into(), "true".into())),
            "--subsample-per-class" => sets.push((
                "subsample_per_class".into(),
                reader.next_value("--subsample-per-class")?,
            )),
            "--checkpoint" => {
                checkpoint_path = Some(PathBuf::from(reader.next_value("--checkpoint")?))
            }
            "--dir" => dir = Some(PathBuf::from(reader.next_value("--dir")?)),
            other => bail!("unknown flag `{other}`\n\n{USAGE}"),
        }
    }

    match command.as_str() {
        "train" => {
            let config_arg = config_arg.context("train needs --config")?;
            cmd_train(&TrainArgs {
                config_arg,
                sets,
                seeds,
                out,
            })
        }
        "evaluate" => {
            let config_arg = config_arg.context("evaluate needs --config")?;
            let checkpoint = checkpoint_path.context("evaluate needs --checkpoint")?;
            cmd_evaluate(&EvaluateArgs {
                checkpoint,
                config_arg,
                sets,
            })
        }
        "stats" => {
            let dir = dir.context("stats needs --dir")?;
            cmd_stats(&StatsArgs {
                dir,
                out: stats_out,
            })
        }
        other => bail!("unknown command `{other}`\n\n{USAGE}"),
    }
}
