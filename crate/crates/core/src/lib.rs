//! Reinforcement-learning workbench for a pull-based three-echelon supply
//! chain: demand regimes, the simulator, PPO and recurrent PPO learners
//! written from scratch, and a harness that cycles one learner across
//! demand regimes to measure transfer and forgetting.

pub mod baseline;
pub mod checkpoint;
pub mod continual;
pub mod demand;
pub mod env;
pub mod error;
pub mod evaluate;
pub mod exec;
pub mod io;
pub mod learner;
pub mod nn;
pub mod ppo;
pub mod rng;
pub mod rppo;
pub mod runner;

pub use demand::{make_task, DemandConfig, DemandStream, Task};
pub use env::{ActionVector, EnvConfig, EnvState, Observation, StepResult, SupplyChainEnv};
pub use error::{Error, Result};
pub use exec::Execution;
pub use learner::{train, Algo, Learner, TrainConfig, TrainOutcome};
pub use ppo::Hyperparams;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
