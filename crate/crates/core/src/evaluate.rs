//! Policy rollouts from a trained learner: step traces and behaviour
//! summaries.

use serde::{Deserialize, Serialize};

use crate::baseline::summarize;
use crate::demand::{DemandStream, Task};
use crate::env::{self, ActionVector, EnvConfig, TraceRow, ECHELONS};
use crate::error::Result;
use crate::exec::Execution;
use crate::learner::Learner;
use crate::rng::{stream, SimRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub task: Task,
    pub episodes: usize,
    pub deterministic: bool,
    pub mean_reward: Option<f64>,
    pub std_reward: Option<f64>,
    pub mean_episode_length: Option<f64>,
    /// Per-echelon mean requested order (after range clamping).
    pub mean_order: [Option<f64>; ECHELONS],
    pub mean_reorder_point: Option<f64>,
    pub mean_retailer_inventory: Option<f64>,
    /// Share of episodes that ended by exceeding the stockout limit.
    pub stockout_termination_fraction: Option<f64>,
    pub rewards: Vec<f64>,
}

/// Plays one episode with its own demand and action streams.
pub fn policy_episode(
    learner: &Learner,
    config: &EnvConfig,
    task: Task,
    seed: u64,
    episode: u64,
    deterministic: bool,
) -> Result<(f64, Vec<TraceRow>)> {
    let demand = DemandStream::new(
        task.config(),
        SimRng::new(seed, stream::EPISODE_BASE + 2 * episode),
    );
    let mut rng = SimRng::new(seed, stream::EPISODE_BASE + 2 * episode + 1);
    let mut state = env::initial_state(config, demand);
    let mut agent = learner.agent();
    let mut total = 0.0;
    let mut trace = Vec::new();
    loop {
        let obs = env::observation_vector(&state, config);
        let out = agent.act(&obs, &mut rng, deterministic)?;
        let result = env::step(&mut state, config, ActionVector::from_indices(out.actions))?;
        total += result.reward;
        trace.push(TraceRow::new(task, &result));
        if result.done {
            return Ok((total, trace));
        }
    }
}

pub fn rollout_trace(
    learner: &Learner,
    config: &EnvConfig,
    task: Task,
    episodes: usize,
    seed: u64,
    deterministic: bool,
    mode: Execution,
) -> Result<(RolloutSummary, Vec<TraceRow>)> {
    config.validate()?;
    let runs = mode.map_range(episodes, |k| {
        policy_episode(learner, config, task, seed, k as u64, deterministic)
    });
    let mut rewards = Vec::with_capacity(episodes);
    let mut rows = Vec::new();
    let mut stockout_ends = 0usize;
    for r in runs {
        let (total, trace) = r?;
        rewards.push(total);
        if trace
            .last()
            .is_some_and(|t| t.stockouts > config.max_stockouts)
        {
            stockout_ends += 1;
        }
        rows.extend(trace);
    }
    let col_mean = |f: &dyn Fn(&TraceRow) -> i64| {
        (!rows.is_empty())
            .then(|| rows.iter().map(|r| f(r) as f64).sum::<f64>() / rows.len() as f64)
    };
    let (mean_reward, std_reward, _) = summarize(&rewards);
    let summary = RolloutSummary {
        task,
        episodes,
        deterministic,
        mean_reward,
        std_reward,
        mean_episode_length: (episodes > 0).then(|| rows.len() as f64 / episodes as f64),
        mean_order: [
            col_mean(&|r| r.q0),
            col_mean(&|r| r.q1),
            col_mean(&|r| r.q2),
        ],
        mean_reorder_point: col_mean(&|r| r.r0),
        mean_retailer_inventory: col_mean(&|r| r.i0),
        stockout_termination_fraction: (episodes > 0)
            .then(|| stockout_ends as f64 / episodes as f64),
        rewards,
    };
    Ok((summary, rows))
}
