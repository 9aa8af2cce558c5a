//! Algorithm-agnostic training loop shared by plain and continual runs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::demand::Task;
use crate::env::{EnvConfig, Observation};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ppo::{
    act_from_logits, ActOutput, EpisodeRewardWindow, Hyperparams, PpoLearner, UpdateStats,
};
use crate::rppo::RppoLearner;
use crate::runner::{EnvRunner, PhasePlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Ppo,
    Rppo,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Ppo => "ppo",
            Algo::Rppo => "rppo",
        }
    }

    pub fn default_hyperparams(self) -> Hyperparams {
        match self {
            Algo::Ppo => Hyperparams::ppo(),
            Algo::Rppo => Hyperparams::rppo(),
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ppo" => Ok(Algo::Ppo),
            "rppo" => Ok(Algo::Rppo),
            _ => Err(Error::Config(format!(
                "unknown algo {s:?} (expected ppo or rppo)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", content = "state", rename_all = "lowercase")]
pub enum Learner {
    Ppo(PpoLearner),
    Rppo(RppoLearner),
}

impl Learner {
    pub fn new(algo: Algo, hp: Hyperparams, env: &EnvConfig, seed: u64) -> Result<Self> {
        Ok(match algo {
            Algo::Ppo => Learner::Ppo(PpoLearner::new(hp, env, seed)?),
            Algo::Rppo => Learner::Rppo(RppoLearner::new(hp, env, seed)?),
        })
    }

    pub fn algo(&self) -> Algo {
        match self {
            Learner::Ppo(_) => Algo::Ppo,
            Learner::Rppo(_) => Algo::Rppo,
        }
    }

    pub fn hp(&self) -> &Hyperparams {
        match self {
            Learner::Ppo(l) => &l.hp,
            Learner::Rppo(l) => &l.hp,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Learner::Ppo(l) => &l.policy.params,
            Learner::Rppo(l) => &l.policy.params,
        }
    }

    /// Collects one rollout and updates on it. The recurrent learner runs
    /// its window update sequentially in either mode.
    pub fn iterate(
        &mut self,
        runner: &mut EnvRunner,
        window: &mut EpisodeRewardWindow,
        mode: Execution,
    ) -> Result<UpdateStats> {
        match self {
            Learner::Ppo(l) => l.iterate(runner, window, mode),
            Learner::Rppo(l) => l.iterate(runner, window),
        }
    }

    /// A fresh acting handle with zero recurrent state.
    pub fn agent(&self) -> Agent<'_> {
        let hidden = match self {
            Learner::Ppo(_) => 0,
            Learner::Rppo(l) => l.policy.hidden(),
        };
        Agent {
            learner: self,
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Acts with a frozen learner, tracking recurrent state across an episode.
pub struct Agent<'a> {
    learner: &'a Learner,
    h: Vec<f64>,
    c: Vec<f64>,
}

impl Agent<'_> {
    pub fn reset(&mut self) {
        self.h
            .iter_mut()
            .chain(self.c.iter_mut())
            .for_each(|v| *v = 0.0);
    }

    pub fn act<R: rand::Rng + ?Sized>(
        &mut self,
        obs: &Observation,
        rng: &mut R,
        deterministic: bool,
    ) -> Result<ActOutput> {
        match self.learner {
            Learner::Ppo(l) => {
                let f = l.policy.forward(obs)?;
                Ok(act_from_logits(&f.logits, f.value, rng, deterministic))
            }
            Learner::Rppo(l) => {
                let out = l
                    .policy
                    .recurrent_act(obs, &self.h, &self.c, rng, deterministic)?;
                self.h = out.h;
                self.c = out.c;
                Ok(out.act)
            }
        }
    }
}

/// One learning-curve row, logged after every rollout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub env_steps: u64,
    pub phase: usize,
    pub task: Task,
    pub window_mean: Option<f64>,
    pub stats: UpdateStats,
}

/// Everything that evolves during training. Serializing a session captures
/// the full resumable state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub learner: Learner,
    pub runner: EnvRunner,
    pub window: EpisodeRewardWindow,
    pub curve: Vec<CurvePoint>,
    pub updates: u64,
}

impl Session {
    pub fn new(
        algo: Algo,
        hp: Hyperparams,
        env: EnvConfig,
        plan: PhasePlan,
        seed: u64,
    ) -> Result<Self> {
        let window = EpisodeRewardWindow::new(hp.stats_window_size);
        let learner = Learner::new(algo, hp, &env, seed)?;
        let runner = EnvRunner::new(env, plan, seed)?;
        Ok(Self {
            learner,
            runner,
            window,
            curve: Vec::new(),
            updates: 0,
        })
    }

    pub fn algo(&self) -> Algo {
        self.learner.algo()
    }

    /// Number of rollouts needed to consume `total_steps`.
    pub fn rollouts_for(&self, total_steps: u64) -> u64 {
        total_steps.div_ceil(self.learner.hp().n_steps as u64)
    }

    /// One rollout plus update; appends and returns the curve point.
    pub fn advance(&mut self, mode: Execution) -> Result<&CurvePoint> {
        let stats = self
            .learner
            .iterate(&mut self.runner, &mut self.window, mode)?;
        self.updates += 1;
        let plan = self.runner.plan();
        self.curve.push(CurvePoint {
            env_steps: self.runner.total_steps,
            phase: plan.current,
            task: plan.task(),
            window_mean: self.window.mean(),
            stats,
        });
        Ok(self.curve.last().expect("just pushed"))
    }

    /// Advances until `rollouts` updates have been performed in total.
    pub fn run_to(&mut self, rollouts: u64, mode: Execution) -> Result<()> {
        while self.updates < rollouts {
            self.advance(mode)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algo: Algo,
    pub task: Task,
    pub seed: u64,
    pub total_steps: u64,
    pub hp: Hyperparams,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub execution: Execution,
}

impl TrainConfig {
    pub fn new(algo: Algo, task: Task, seed: u64, total_steps: u64) -> Self {
        Self {
            algo,
            task,
            seed,
            total_steps,
            hp: algo.default_hyperparams(),
            env: EnvConfig::default(),
            execution: Execution::default(),
        }
    }
}

pub type TrainOutcome = Session;

/// Plain single-task training: alternates rollout and update until
/// `total_steps` env steps (rounded up to whole rollouts) are consumed.
pub fn train(cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut session = Session::new(
        cfg.algo,
        cfg.hp.clone(),
        cfg.env.clone(),
        PhasePlan::single(cfg.task),
        cfg.seed,
    )?;
    let rollouts = session.rollouts_for(cfg.total_steps);
    session.run_to(rollouts, cfg.execution)?;
    Ok(session)
}
