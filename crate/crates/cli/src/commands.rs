//! One function per verb. Each seed writes into its own directory.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use echelon_core::baseline::run_baseline;
use echelon_core::checkpoint::{Checkpoint, FORMAT_VERSION};
use echelon_core::continual::{
    phase_series, resume_continual, run_continual, transfer_metrics, ContinualConfig,
};
use echelon_core::evaluate::{rollout_trace, RolloutSummary};
use echelon_core::io::{
    write_continual_curve, write_curve, write_episode_rewards, write_json, write_trace,
};
use echelon_core::nn::INIT_SCHEME;
use echelon_core::rng::{NORMAL_SAMPLER, RNG_FAMILY};
use echelon_core::{train, EnvConfig, Execution, Task, TrainConfig, VERSION};
use serde::Serialize;

#[derive(Serialize)]
struct Metadata<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    format_version: u32,
    rng_family: &'a str,
    normal_sampler: &'a str,
    init_scheme: &'a str,
    config: &'a C,
}

fn write_metadata<C: Serialize>(dir: &Path, command: &str, config: &C) -> Result<()> {
    let meta = Metadata {
        command,
        version: VERSION,
        format_version: FORMAT_VERSION,
        rng_family: RNG_FAMILY,
        normal_sampler: NORMAL_SAMPLER,
        init_scheme: INIT_SCHEME,
        config,
    };
    write_json(&dir.join("metadata.json"), &meta)?;
    Ok(())
}

fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    ckpt.save(path)
        .with_context(|| format!("writing {}", path.display()))
}

pub fn seed_dir(root: &Path, verb: &str, run: &str, seed: u64) -> PathBuf {
    root.join(verb).join(run).join(format!("seed-{seed}"))
}

fn fmt_mean(m: Option<f64>) -> String {
    m.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"))
}

/// Runs `f` once per seed, on separate threads when `fan_out` is set.
/// Results come back in seed order; the first failure by seed order wins.
pub fn for_each_seed<T, F>(seeds: &[u64], fan_out: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    if !fan_out || seeds.len() < 2 {
        return seeds.iter().map(|&s| f(s)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&s| {
                let f = &f;
                scope.spawn(move || f(s))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("seed worker panicked"))
            .collect()
    })
}

pub fn train_seed(root: &Path, cfg: &TrainConfig) -> Result<PathBuf> {
    let dir = seed_dir(
        root,
        "train",
        &format!("{}-{}", cfg.algo, cfg.task),
        cfg.seed,
    );
    let session = train(cfg)?;
    write_curve(&dir.join("curve.csv"), cfg.algo, cfg.seed, &session.curve)?;
    let final_mean = session.curve.last().and_then(|p| p.window_mean);
    save_checkpoint(&dir.join("checkpoint.json"), &Checkpoint::new(session))?;
    write_metadata(&dir, "train", cfg)?;
    println!(
        "train {} {} seed {}: final window mean {} -> {}",
        cfg.algo,
        cfg.task,
        cfg.seed,
        fmt_mean(final_mean),
        dir.display()
    );
    Ok(dir)
}

/// Runs (or resumes) one continual schedule and writes its artifacts.
pub fn continual_seed(
    root: &Path,
    cfg: &ContinualConfig,
    resume: Option<Checkpoint>,
) -> Result<PathBuf> {
    let dir = seed_dir(
        root,
        "continual",
        &format!("{}-{}", cfg.algo, cfg.schedule.name),
        cfg.seed,
    );
    let outcome = match resume {
        Some(ckpt) => resume_continual(cfg, ckpt.session)?,
        None => run_continual(cfg)?,
    };
    let s = &outcome.session;
    write_continual_curve(
        &dir.join("continual.csv"),
        cfg.algo,
        &cfg.schedule.name,
        cfg.seed,
        &s.curve,
    )?;
    write_json(&dir.join("phases.json"), &outcome.logs)?;
    match transfer_metrics(&phase_series(s)) {
        Ok(m) => write_json(&dir.join("transfer_metrics.json"), &m)?,
        Err(e) => eprintln!("seed {}: no transfer metrics ({e})", cfg.seed),
    }
    for b in &outcome.checkpoints {
        let mut ckpt = Checkpoint::new(b.session.clone());
        ckpt.continual = Some(cfg.clone());
        save_checkpoint(&dir.join(format!("boundary-{}.json", b.phase)), &ckpt)?;
    }
    let mut last = Checkpoint::new(outcome.session);
    last.continual = Some(cfg.clone());
    save_checkpoint(&dir.join("checkpoint.json"), &last)?;
    write_metadata(&dir, "continual", cfg)?;
    println!(
        "continual {} {} seed {}: {} phases -> {}",
        cfg.algo,
        cfg.schedule.name,
        cfg.seed,
        outcome.logs.len(),
        dir.display()
    );
    Ok(dir)
}

#[derive(Debug, Serialize)]
pub struct BaselineRun<'a> {
    pub task: Task,
    pub episodes: usize,
    pub seed: u64,
    pub env: &'a EnvConfig,
}

pub fn baseline_seed(root: &Path, run: &BaselineRun<'_>, mode: Execution) -> Result<PathBuf> {
    let dir = seed_dir(root, "baseline-random", run.task.name(), run.seed);
    let (report, traces) = run_baseline(run.env, run.task, run.episodes, run.seed, mode)?;
    write_episode_rewards(&dir.join("episodes.csv"), &report.rewards)?;
    write_trace(&dir.join("trace.csv"), &traces.concat())?;
    write_json(&dir.join("baseline.json"), &report)?;
    write_metadata(&dir, "baseline-random", run)?;
    println!(
        "baseline {} seed {}: mean {} std {} se {} over {} episodes",
        run.task,
        run.seed,
        fmt_mean(report.mean),
        fmt_mean(report.std),
        report
            .standard_error
            .map_or_else(|| "null".to_string(), |v| format!("{v:.1}")),
        run.episodes
    );
    Ok(dir)
}

#[derive(Debug, Serialize)]
pub struct PolicyRun<'a> {
    pub checkpoint: &'a Path,
    pub tasks: Vec<Task>,
    pub episodes: usize,
    pub seed: u64,
    pub deterministic: bool,
    pub env: &'a EnvConfig,
}

fn summary_line(verb: &str, s: &RolloutSummary) -> String {
    let orders: Vec<String> = s.mean_order.iter().map(|m| fmt_mean(*m)).collect();
    format!(
        "{verb} {}: mean reward {} over {} episodes, mean orders [{}], stockout-terminated {}",
        s.task,
        fmt_mean(s.mean_reward),
        s.episodes,
        orders.join(", "),
        s.stockout_termination_fraction
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
    )
}

pub fn rollout_trace_run(root: &Path, run: &PolicyRun<'_>, mode: Execution) -> Result<PathBuf> {
    let ckpt = Checkpoint::load(run.checkpoint)
        .with_context(|| format!("loading {}", run.checkpoint.display()))?;
    let task = run.tasks[0];
    let dir = seed_dir(
        root,
        "rollout-trace",
        &format!("{}-{}", ckpt.algo, task),
        run.seed,
    );
    let (summary, rows) = rollout_trace(
        &ckpt.session.learner,
        run.env,
        task,
        run.episodes,
        run.seed,
        run.deterministic,
        mode,
    )?;
    write_trace(&dir.join("trace.csv"), &rows)?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_metadata(&dir, "rollout-trace", run)?;
    println!("{}", summary_line("rollout-trace", &summary));
    Ok(dir)
}

/// Evaluates one checkpoint on several tasks with per-task summaries.
pub fn eval_run(root: &Path, run: &PolicyRun<'_>, mode: Execution) -> Result<PathBuf> {
    let ckpt = Checkpoint::load(run.checkpoint)
        .with_context(|| format!("loading {}", run.checkpoint.display()))?;
    let dir = seed_dir(root, "eval", ckpt.algo.name(), run.seed);
    let mut summaries = Vec::with_capacity(run.tasks.len());
    for &task in &run.tasks {
        let (summary, _) = rollout_trace(
            &ckpt.session.learner,
            run.env,
            task,
            run.episodes,
            run.seed,
            run.deterministic,
            mode,
        )?;
        write_episode_rewards(&dir.join(format!("episodes-{task}.csv")), &summary.rewards)?;
        println!("{}", summary_line("eval", &summary));
        summaries.push(summary);
    }
    write_json(&dir.join("eval.json"), &summaries)?;
    write_metadata(&dir, "eval", run)?;
    Ok(dir)
}
