//! Continual training: one persistent learner cycled through a schedule of
//! demand regimes, with per-phase logs and transfer / forgetting metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::demand::Task;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::learner::{Algo, CurvePoint, Session};
use crate::ppo::Hyperparams;
use crate::runner::PhasePlan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    BatchUp,
    BatchDown,
    StoUp,
    StoDown,
    ExtremeBatToSto,
    ExtremeStoToBat,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::BatchUp,
        Preset::BatchDown,
        Preset::StoUp,
        Preset::StoDown,
        Preset::ExtremeBatToSto,
        Preset::ExtremeStoToBat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::BatchUp => "batch-up",
            Preset::BatchDown => "batch-down",
            Preset::StoUp => "sto-up",
            Preset::StoDown => "sto-down",
            Preset::ExtremeBatToSto => "extreme-bat-to-sto",
            Preset::ExtremeStoToBat => "extreme-sto-to-bat",
        }
    }

    /// Tasks of a single cycle.
    pub fn tasks(self) -> Vec<Task> {
        use Task::*;
        match self {
            Preset::BatchUp => vec![Bat3, Bat7, Bat10],
            Preset::BatchDown => vec![Bat10, Bat7, Bat3],
            Preset::StoUp => vec![Sto0, Sto01, Sto1],
            Preset::StoDown => vec![Sto1, Sto01, Sto0],
            Preset::ExtremeBatToSto => vec![Bat10, Sto0],
            Preset::ExtremeStoToBat => vec![Sto0, Bat10],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSchedule {
    /// Preset name, or "custom".
    pub name: String,
    /// Tasks of one cycle.
    pub tasks: Vec<Task>,
    pub phase_length: u64,
    pub cycles: u32,
}

pub fn make_schedule(preset: &str, phase_length: u64, cycles: u32) -> Result<TaskSchedule> {
    let p: Preset = preset.parse()?;
    TaskSchedule::new(p.name(), p.tasks(), phase_length, cycles)
}

impl TaskSchedule {
    pub fn new(name: &str, tasks: Vec<Task>, phase_length: u64, cycles: u32) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Config("schedule needs at least one task".into()));
        }
        if cycles == 0 {
            return Err(Error::Config("cycles must be >= 1".into()));
        }
        if phase_length == 0 {
            return Err(Error::Config("phase_length must be >= 1".into()));
        }
        Ok(Self {
            name: name.to_string(),
            tasks,
            phase_length,
            cycles,
        })
    }

    /// The full phase sequence, `cycles` repetitions of the cycle.
    pub fn phases(&self) -> Vec<Task> {
        (0..self.cycles)
            .flat_map(|_| self.tasks.iter().copied())
            .collect()
    }

    pub fn total_steps(&self) -> u64 {
        self.phase_length * self.phases().len() as u64
    }

    pub fn validate(&self, hp: &Hyperparams) -> Result<()> {
        if self.phase_length < hp.n_steps as u64 {
            return Err(Error::Config(format!(
                "phase_length {} is shorter than one rollout ({})",
                self.phase_length, hp.n_steps
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinualConfig {
    pub algo: Algo,
    pub schedule: TaskSchedule,
    pub seed: u64,
    pub hp: Hyperparams,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub execution: Execution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseLog {
    pub phase: usize,
    pub task: Task,
    pub start_step: u64,
    pub end_step: u64,
    pub end_window_mean: Option<f64>,
    pub best_window_mean: Option<f64>,
}

/// Full session captured at the first update boundary of a new phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCheckpoint {
    pub phase: usize,
    pub session: Session,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinualOutcome {
    pub session: Session,
    pub logs: Vec<PhaseLog>,
    pub checkpoints: Vec<BoundaryCheckpoint>,
}

pub fn new_session(cfg: &ContinualConfig) -> Result<Session> {
    cfg.hp.validate()?;
    cfg.schedule.validate(&cfg.hp)?;
    let plan = PhasePlan::new(cfg.schedule.phases(), cfg.schedule.phase_length)?;
    Session::new(cfg.algo, cfg.hp.clone(), cfg.env.clone(), plan, cfg.seed)
}

pub fn run_continual(cfg: &ContinualConfig) -> Result<ContinualOutcome> {
    resume_continual(cfg, new_session(cfg)?)
}

/// Runs `session` to the end of the schedule. A fresh session and a
/// boundary checkpoint continue identically.
pub fn resume_continual(cfg: &ContinualConfig, mut session: Session) -> Result<ContinualOutcome> {
    let target = session.rollouts_for(cfg.schedule.total_steps());
    let mut checkpoints = Vec::new();
    let mut phase = session.runner.plan().current;
    while session.updates < target {
        session.advance(cfg.execution)?;
        let now = session.runner.plan().current;
        if now != phase {
            phase = now;
            checkpoints.push(BoundaryCheckpoint {
                phase,
                session: session.clone(),
            });
        }
    }
    let logs = phase_logs(&session);
    Ok(ContinualOutcome {
        session,
        logs,
        checkpoints,
    })
}

/// One log per phase that started; ranges are contiguous and end at the
/// run's final step.
pub fn phase_logs(session: &Session) -> Vec<PhaseLog> {
    let bounds = &session.runner.plan().boundaries;
    let end = session.runner.total_steps;
    bounds
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let end_step = bounds.get(i + 1).map_or(end, |n| n.start_step);
            let means: Vec<f64> = session
                .curve
                .iter()
                .filter(|p| p.phase == b.phase)
                .filter_map(|p| p.window_mean)
                .collect();
            PhaseLog {
                phase: b.phase,
                task: b.task,
                start_step: b.start_step,
                end_step,
                end_window_mean: means.last().copied(),
                best_window_mean: means.iter().copied().reduce(f64::max),
            }
        })
        .collect()
}

/// Window-mean series of one phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeries {
    pub task: Task,
    pub start_step: u64,
    pub end_step: u64,
    /// `(env_steps, window_mean)` in step order.
    pub points: Vec<(u64, f64)>,
}

pub fn phase_series(session: &Session) -> Vec<PhaseSeries> {
    phase_logs(session)
        .into_iter()
        .map(|log| PhaseSeries {
            task: log.task,
            start_step: log.start_step,
            end_step: log.end_step,
            points: session
                .curve
                .iter()
                .filter(|p| p.phase == log.phase)
                .filter_map(|p: &CurvePoint| p.window_mean.map(|m| (p.env_steps, m)))
                .collect(),
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskTransfer {
    /// Start mean of each later occurrence minus start mean of the first.
    pub forward_transfer: Vec<f64>,
    /// Best mean so far on the task minus start mean of its next occurrence.
    pub forgetting: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMetrics {
    pub per_task: BTreeMap<String, TaskTransfer>,
    /// Per phase; `None` for the first.
    pub dip_depth: Vec<Option<f64>>,
}

pub fn transfer_metrics(series: &[PhaseSeries]) -> Result<TransferMetrics> {
    if series.len() < 2 {
        return Err(Error::Metrics(format!(
            "transfer metrics need at least 2 phases, got {}",
            series.len()
        )));
    }
    if let Some(i) = series.iter().position(|s| s.points.is_empty()) {
        return Err(Error::Metrics(format!("phase {i} has no window means")));
    }
    let start = |i: usize| series[i].points[0].1;

    let mut per_task: BTreeMap<String, TaskTransfer> = BTreeMap::new();
    for task in Task::ALL {
        let occ: Vec<usize> = (0..series.len())
            .filter(|&i| series[i].task == task)
            .collect();
        if occ.is_empty() {
            continue;
        }
        let mut t = TaskTransfer::default();
        let first = start(occ[0]);
        let mut best = f64::NEG_INFINITY;
        for (k, &i) in occ.iter().enumerate() {
            if k > 0 {
                t.forward_transfer.push(start(i) - first);
            }
            best = series[i].points.iter().map(|p| p.1).fold(best, f64::max);
            if let Some(&next) = occ.get(k + 1) {
                t.forgetting.push(best - start(next));
            }
        }
        per_task.insert(task.name().to_string(), t);
    }

    let mut dip_depth = vec![None];
    for i in 1..series.len() {
        let prev_final = series[i - 1].points.last().expect("non-empty").1;
        let s = &series[i];
        let horizon = (s.end_step - s.start_step) as f64 * 0.1;
        let early = s
            .points
            .iter()
            .filter(|p| (p.0 - s.start_step) as f64 <= horizon)
            .map(|p| prev_final - p.1)
            .reduce(f64::max);
        dip_depth.push(Some(early.unwrap_or(prev_final - s.points[0].1)));
    }
    Ok(TransferMetrics {
        per_task,
        dip_depth,
    })
}
