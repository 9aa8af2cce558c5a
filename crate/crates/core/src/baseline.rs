//! Uniform-random policy baseline.
//!
//! Episode `k` owns its demand stream and action stream, both derived from
//! `(seed, k)`, so episodes are independent of each other and of how they
//! are scheduled across threads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::demand::{DemandStream, Task};
use crate::env::{self, ActionVector, EnvConfig, TraceRow};
use crate::error::Result;
use crate::exec::Execution;
use crate::rng::{stream, SimRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub task: Task,
    pub seed: u64,
    pub episodes: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation; `None` below two episodes.
    pub std: Option<f64>,
    pub standard_error: Option<f64>,
    pub rewards: Vec<f64>,
}

/// Mean, sample standard deviation and standard error of the mean.
pub fn summarize(xs: &[f64]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (None, None, None);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    (Some(mean), Some(std), Some(std / (n as f64).sqrt()))
}

pub fn random_action<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> ActionVector {
    let sizes = config.head_sizes();
    ActionVector::from_indices(sizes.map(|n| rng.random_range(0..n)))
}

/// Plays one random episode, returning its total reward and step trace.
pub fn random_episode(
    config: &EnvConfig,
    task: Task,
    seed: u64,
    episode: u64,
) -> Result<(f64, Vec<TraceRow>)> {
    let demand = DemandStream::new(
        task.config(),
        SimRng::new(seed, stream::EPISODE_BASE + 2 * episode),
    );
    let mut actions = SimRng::new(seed, stream::EPISODE_BASE + 2 * episode + 1);
    let mut state = env::initial_state(config, demand);
    let mut total = 0.0;
    let mut trace = Vec::new();
    loop {
        let action = random_action(config, &mut actions);
        let result = env::step(&mut state, config, action)?;
        total += result.reward;
        trace.push(TraceRow::new(task, &result));
        if result.done {
            return Ok((total, trace));
        }
    }
}

/// Runs `episodes` independent random episodes. Traces are returned in
/// episode order.
pub fn run_baseline(
    config: &EnvConfig,
    task: Task,
    episodes: usize,
    seed: u64,
    mode: Execution,
) -> Result<(BaselineReport, Vec<Vec<TraceRow>>)> {
    config.validate()?;
    let runs = mode.map_range(episodes, |k| random_episode(config, task, seed, k as u64));
    let mut rewards = Vec::with_capacity(episodes);
    let mut traces = Vec::with_capacity(episodes);
    for r in runs {
        let (total, trace) = r?;
        rewards.push(total);
        traces.push(trace);
    }
    let (mean, std, standard_error) = summarize(&rewards);
    Ok((
        BaselineReport {
            task,
            seed,
            episodes,
            mean,
            std,
            standard_error,
            rewards,
        },
        traces,
    ))
}
