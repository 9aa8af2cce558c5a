//! Customer demand generation for the six test regimes.
//!
//! Demand is drawn from a normal distribution, rounded half away from zero
//! and clamped at zero. Batched regimes repeat each draw `batch_size` times;
//! the repetition phase is anchored to the start of the stream, so batches
//! may straddle episode boundaries.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Canonical task identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    Bat3,
    Bat7,
    Bat10,
    Sto1,
    Sto01,
    Sto0,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Bat3,
        Task::Bat7,
        Task::Bat10,
        Task::Sto1,
        Task::Sto01,
        Task::Sto0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Bat3 => "Bat3",
            Task::Bat7 => "Bat7",
            Task::Bat10 => "Bat10",
            Task::Sto1 => "Sto1",
            Task::Sto01 => "Sto01",
            Task::Sto0 => "Sto0",
        }
    }

    pub fn config(self) -> DemandConfig {
        let (std, batch_size) = match self {
            Task::Bat3 => (0.1, 3),
            Task::Bat7 => (0.1, 7),
            Task::Bat10 => (0.1, 10),
            Task::Sto1 => (1.0, 1),
            Task::Sto01 => (0.1, 1),
            Task::Sto0 => (0.0, 1),
        };
        DemandConfig {
            mean: 2.0,
            std,
            batch_size,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown task {s:?} (expected one of Bat3, Bat7, Bat10, Sto1, Sto01, Sto0)"
                ))
            })
    }
}

/// Looks up the demand parameters of a named task.
pub fn make_task(name: &str) -> Result<DemandConfig> {
    name.parse::<Task>().map(Task::config)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandConfig {
    /// Units per day.
    pub mean: f64,
    pub std: f64,
    /// Number of consecutive days each draw is held for.
    pub batch_size: u32,
}

impl DemandConfig {
    pub fn new(mean: f64, std: f64, batch_size: u32) -> Result<Self> {
        let cfg = Self {
            mean,
            std,
            batch_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.mean >= 0.0) {
            return Err(Error::Config(format!(
                "demand mean must be >= 0, got {}",
                self.mean
            )));
        }
        if !(self.std.is_finite() && self.std >= 0.0) {
            return Err(Error::Config(format!(
                "demand std must be >= 0, got {}",
                self.std
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Stateful demand generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandStream {
    config: DemandConfig,
    rng: SimRng,
    held_value: i64,
    repeats_remaining: u32,
}

impl DemandStream {
    pub fn new(config: DemandConfig, rng: SimRng) -> Self {
        Self {
            config,
            rng,
            held_value: 0,
            repeats_remaining: 0,
        }
    }

    pub fn config(&self) -> &DemandConfig {
        &self.config
    }

    pub fn repeats_remaining(&self) -> u32 {
        self.repeats_remaining
    }

    pub fn next_demand(&mut self) -> i64 {
        if self.repeats_remaining > 0 {
            self.repeats_remaining -= 1;
            return self.held_value;
        }
        // std has been validated as finite and non-negative
        let normal =
            Normal::new(self.config.mean, self.config.std).expect("validated normal parameters");
        let x: f64 = normal.sample(&mut self.rng);
        self.held_value = round_demand(x);
        self.repeats_remaining = self.config.batch_size - 1;
        self.held_value
    }
}

/// Round half away from zero, then clamp at zero.
pub fn round_demand(x: f64) -> i64 {
    (x.round() as i64).max(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn stream_for(task: Task, seed: u64) -> DemandStream {
        DemandStream::new(task.config(), SimRng::new(seed, stream::DEMAND_BASE))
    }

    #[test]
    fn table_parameters() {
        assert_eq!(
            make_task("Bat3").unwrap(),
            DemandConfig {
                mean: 2.0,
                std: 0.1,
                batch_size: 3
            }
        );
        assert_eq!(
            make_task("Sto0").unwrap(),
            DemandConfig {
                mean: 2.0,
                std: 0.0,
                batch_size: 1
            }
        );
        assert_eq!(
            make_task("Sto1").unwrap(),
            DemandConfig {
                mean: 2.0,
                std: 1.0,
                batch_size: 1
            }
        );
        for t in [Task::Sto1, Task::Sto01, Task::Sto0] {
            assert_eq!(t.config().batch_size, 1);
        }
        assert!(matches!(make_task("Bat5"), Err(Error::Config(_))));
    }

    #[test]
    fn sto0_is_constant() {
        let mut s = stream_for(Task::Sto0, 3);
        assert!((0..1000).all(|_| s.next_demand() == 2));
    }

    #[test]
    fn batch_one_matches_plain_stochastic() {
        let cfg = DemandConfig::new(2.0, 1.0, 1).unwrap();
        let mut a = DemandStream::new(cfg, SimRng::new(11, 0));
        let mut b = stream_for(Task::Sto1, 0);
        b.rng = SimRng::new(11, 0);
        for _ in 0..500 {
            assert_eq!(a.next_demand(), b.next_demand());
        }
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_demand(2.5), 3);
        assert_eq!(round_demand(1.49), 1);
        assert_eq!(round_demand(-0.5), 0);
        assert_eq!(round_demand(-3.2), 0);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(DemandConfig::new(2.0, -0.1, 1).is_err());
        assert!(DemandConfig::new(2.0, 0.1, 0).is_err());
        assert!(DemandConfig::new(-1.0, 0.1, 1).is_err());
    }

    #[test]
    fn repeats_remaining_below_batch_size() {
        let mut s = stream_for(Task::Bat7, 5);
        for _ in 0..100 {
            s.next_demand();
            assert!(s.repeats_remaining() < 7);
        }
    }
}
