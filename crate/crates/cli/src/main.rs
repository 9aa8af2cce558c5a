//! `echelon`: train, continual, baseline-random, rollout-trace and eval.
//!
//! Exit codes: 0 success, 2 usage or configuration, 3 I/O or checkpoint,
//! 4 non-finite loss.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use echelon_core::checkpoint::Checkpoint;
use echelon_core::continual::{make_schedule, ContinualConfig};
use echelon_core::{Algo, EnvConfig, Error, Execution, Task, TrainConfig};

use commands::{BaselineRun, PolicyRun};
use config::{require, usage, FileConfig, UsageError};

#[derive(Parser, Debug)]
#[command(
    name = "echelon",
    version,
    about = "Supply-chain reinforcement learning workbench"
)]
struct Cli {
    /// TOML config file; flags given on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root [default: $ECHELON_OUT, else ./runs].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run seeds one after another and disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one learner per seed on a single task.
    Train(TrainArgs),
    /// Cycle one learner per seed through a task schedule.
    Continual(ContinualArgs),
    /// Uniform-random policy statistics and traces.
    BaselineRandom(BaselineArgs),
    /// Step traces and behaviour summary of a saved policy.
    RolloutTrace(PolicyArgs),
    /// Reward summaries of a saved policy on one or more tasks.
    Eval(PolicyArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// ppo or rppo.
    #[arg(long)]
    algo: Option<String>,
    /// Bat3, Bat7, Bat10, Sto1, Sto01 or Sto0.
    #[arg(long)]
    task: Option<String>,
    /// Comma-separated seeds.
    #[arg(long, alias = "seed")]
    seeds: Option<String>,
    /// Environment steps per seed (rounded up to whole rollouts).
    #[arg(long)]
    steps: Option<u64>,
    /// Hyperparameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct ContinualArgs {
    #[arg(long)]
    algo: Option<String>,
    /// batch-up, batch-down, sto-up, sto-down, extreme-bat-to-sto or extreme-sto-to-bat.
    #[arg(long)]
    preset: Option<String>,
    /// Environment steps per phase.
    #[arg(long)]
    phase_steps: Option<u64>,
    #[arg(long)]
    cycles: Option<u32>,
    #[arg(long, alias = "seed")]
    seeds: Option<String>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Continue from a boundary checkpoint; its stored run config is used.
    #[arg(long, conflicts_with_all = ["algo", "preset", "phase_steps", "cycles", "seeds", "set"])]
    resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long, alias = "seed")]
    seeds: Option<String>,
}

#[derive(Args, Debug)]
struct PolicyArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Task; eval also accepts a comma-separated list (default: all six).
    #[arg(long, alias = "tasks")]
    task: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Greedy actions instead of sampling.
    #[arg(long)]
    deterministic: bool,
}

fn parse_algo(s: &str) -> Result<Algo> {
    Ok(s.parse()?)
}

fn parse_tasks(s: &str) -> Result<Vec<Task>> {
    s.split(',')
        .map(|t| Ok(t.trim().parse::<Task>()?))
        .collect()
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let root = config::output_root(cli.out.as_deref(), &file);
    let sequential = cli.sequential || file.sequential.unwrap_or(false);
    let mode = execution(sequential);
    let fan_out = mode.is_parallel();
    let env = file.env.clone().unwrap_or_default();
    env.validate()?;

    match cli.command {
        Command::Train(a) => {
            let algo = parse_algo(&require(a.algo.or(file.algo.clone()), "algo")?)?;
            let task: Task = require(a.task.or(file.task.clone()), "task")?.parse()?;
            let steps = require(a.steps.or(file.steps), "steps")?;
            let seeds = config::seeds(a.seeds.as_deref(), &file, None)?;
            let hp = config::hyperparams(algo, &file, &a.set)?;
            commands::for_each_seed(&seeds, fan_out, |seed| {
                let mut cfg = TrainConfig::new(algo, task, seed, steps);
                cfg.hp = hp.clone();
                cfg.env = env.clone();
                cfg.execution = mode;
                commands::train_seed(&root, &cfg)
            })?;
        }
        Command::Continual(a) => {
            if let Some(path) = &a.resume {
                let ckpt = Checkpoint::load(path)?;
                let mut cfg = ckpt.continual.clone().ok_or_else(|| {
                    usage(format!("{} is not a continual checkpoint", path.display()))
                })?;
                cfg.execution = mode;
                commands::continual_seed(&root, &cfg, Some(ckpt))?;
                return Ok(());
            }
            let algo = parse_algo(&require(a.algo.or(file.algo.clone()), "algo")?)?;
            let preset = require(a.preset.or(file.preset.clone()), "preset")?;
            let phase_steps = require(a.phase_steps.or(file.phase_steps), "phase-steps")?;
            let cycles = a.cycles.or(file.cycles).unwrap_or(1);
            let schedule = make_schedule(&preset, phase_steps, cycles)?;
            let seeds = config::seeds(a.seeds.as_deref(), &file, None)?;
            let hp = config::hyperparams(algo, &file, &a.set)?;
            schedule.validate(&hp)?;
            commands::for_each_seed(&seeds, fan_out, |seed| {
                let cfg = ContinualConfig {
                    algo,
                    schedule: schedule.clone(),
                    seed,
                    hp: hp.clone(),
                    env: env.clone(),
                    execution: mode,
                };
                commands::continual_seed(&root, &cfg, None)
            })?;
        }
        Command::BaselineRandom(a) => {
            let task: Task = require(a.task.or(file.task.clone()), "task")?.parse()?;
            let episodes = a.episodes.or(file.episodes).unwrap_or(1000);
            let seeds = config::seeds(a.seeds.as_deref(), &file, Some(0))?;
            commands::for_each_seed(&seeds, fan_out, |seed| {
                let run = BaselineRun {
                    task,
                    episodes,
                    seed,
                    env: &env,
                };
                commands::baseline_seed(&root, &run, mode)
            })?;
        }
        Command::RolloutTrace(a) => {
            let run = policy_run(&a, &file, &env, false)?;
            commands::rollout_trace_run(&root, &run, mode)?;
        }
        Command::Eval(a) => {
            let run = policy_run(&a, &file, &env, true)?;
            commands::eval_run(&root, &run, mode)?;
        }
    }
    Ok(())
}

fn policy_run<'a>(
    a: &'a PolicyArgs,
    file: &'a FileConfig,
    env: &'a EnvConfig,
    multi: bool,
) -> Result<PolicyRun<'a>> {
    let checkpoint = require(
        a.checkpoint.as_deref().or(file.checkpoint.as_deref()),
        "checkpoint",
    )?;
    let tasks = match (a.task.as_deref(), file.task.as_deref(), &file.tasks) {
        (Some(t), _, _) | (None, Some(t), _) => parse_tasks(t)?,
        (None, None, Some(ts)) => parse_tasks(&ts.join(","))?,
        (None, None, None) if multi => Task::ALL.to_vec(),
        _ => return Err(usage("missing required --task")),
    };
    if !multi && tasks.len() != 1 {
        return Err(usage("rollout-trace takes a single --task"));
    }
    Ok(PolicyRun {
        checkpoint,
        tasks,
        episodes: a.episodes.or(file.episodes).unwrap_or(100),
        seed: a
            .seed
            .or(file.seeds.as_ref().and_then(|s| s.first().copied()))
            .unwrap_or(0),
        deterministic: a.deterministic || file.deterministic.unwrap_or(false),
        env,
    })
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    if let Some(core) = e.downcast_ref::<Error>() {
        return match core {
            Error::Config(_) | Error::Usage(_) | Error::Metrics(_) => 2,
            Error::NonFinite(_) => 4,
            Error::CheckpointVersion { .. }
            | Error::CheckpointAlgo { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 3,
        };
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return 3;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
