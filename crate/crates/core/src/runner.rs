//! Drives one environment for a learner: auto-reset, episode bookkeeping
//! and scheduled task switches.

use serde::{Deserialize, Serialize};

use crate::demand::Task;
use crate::env::{ActionVector, EnvConfig, Observation, StepResult, SupplyChainEnv, TraceRow};
use crate::error::{Error, Result};
use crate::ppo::EpisodeRewardWindow;

/// Sequence of demand regimes, each nominally `phase_length` env steps.
///
/// A switch takes effect at the first episode reset after the step
/// threshold, never mid-episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub tasks: Vec<Task>,
    pub phase_length: u64,
    pub current: usize,
    pub boundaries: Vec<PhaseBoundary>,
}

/// Where a phase actually began.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundary {
    pub phase: usize,
    pub task: Task,
    pub start_step: u64,
    /// Window contents when the phase began.
    pub window_snapshot: Vec<f64>,
}

impl PhasePlan {
    pub fn new(tasks: Vec<Task>, phase_length: u64) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Config("phase plan needs at least one task".into()));
        }
        if phase_length == 0 {
            return Err(Error::Config("phase length must be > 0".into()));
        }
        let first = PhaseBoundary {
            phase: 0,
            task: tasks[0],
            start_step: 0,
            window_snapshot: Vec::new(),
        };
        Ok(Self {
            tasks,
            phase_length,
            current: 0,
            boundaries: vec![first],
        })
    }

    /// A plan that never switches.
    pub fn single(task: Task) -> Self {
        Self::new(vec![task], u64::MAX).expect("non-empty plan")
    }

    pub fn task(&self) -> Task {
        self.tasks[self.current]
    }

    fn switch_due(&self, total_steps: u64) -> bool {
        self.current + 1 < self.tasks.len()
            && total_steps >= (self.current as u64 + 1).saturating_mul(self.phase_length)
    }
}

pub struct StepOutcome {
    pub result: StepResult,
    /// Total reward of the episode that just ended.
    pub episode_reward: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvRunner {
    env: SupplyChainEnv,
    obs: Observation,
    seed: u64,
    plan: PhasePlan,
    pub episode_reward: f64,
    pub total_steps: u64,
    pub episodes: u64,
    /// `(env step at episode end, episode reward)` when enabled.
    #[serde(default)]
    pub episode_log: Option<Vec<(u64, f64)>>,
    #[serde(skip)]
    pub trace: Option<Vec<TraceRow>>,
}

impl EnvRunner {
    pub fn new(config: EnvConfig, plan: PhasePlan, seed: u64) -> Result<Self> {
        let env = SupplyChainEnv::new(config, plan.task(), seed)?;
        let obs = env.observation();
        Ok(Self {
            env,
            obs,
            seed,
            plan,
            episode_reward: 0.0,
            total_steps: 0,
            episodes: 0,
            episode_log: None,
            trace: None,
        })
    }

    pub fn observation(&self) -> Observation {
        self.obs
    }

    pub fn env(&self) -> &SupplyChainEnv {
        &self.env
    }

    pub fn plan(&self) -> &PhasePlan {
        &self.plan
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step(
        &mut self,
        action: ActionVector,
        window: &mut EpisodeRewardWindow,
    ) -> Result<StepOutcome> {
        let result = self.env.step(action)?;
        self.total_steps += 1;
        self.episode_reward += result.reward;
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceRow::new(self.env.task(), &result));
        }
        let mut episode_reward = None;
        if result.done {
            let total = self.episode_reward;
            window.push(total);
            self.episodes += 1;
            if let Some(log) = self.episode_log.as_mut() {
                log.push((self.total_steps, total));
            }
            episode_reward = Some(total);
            self.episode_reward = 0.0;
            self.obs = if self.plan.switch_due(self.total_steps) {
                self.plan.current += 1;
                let phase = self.plan.current;
                let task = self.plan.task();
                self.plan.boundaries.push(PhaseBoundary {
                    phase,
                    task,
                    start_step: self.total_steps,
                    window_snapshot: window.contents(),
                });
                self.env.set_task(task, self.seed, phase as u64)
            } else {
                self.env.reset()
            };
        } else {
            self.obs = result.observation;
        }
        Ok(StepOutcome {
            result,
            episode_reward,
        })
    }
}
