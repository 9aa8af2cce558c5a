use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::AdamConfig;

/// Learner hyperparameters. [`Hyperparams::ppo`] and [`Hyperparams::rppo`]
/// carry the tuned defaults for the feed-forward and recurrent learners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_steps: usize,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub clip_range: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub vf_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantage: bool,
    pub stats_window_size: usize,
    /// Hidden widths of the feed-forward trunk.
    pub hidden_sizes: Vec<usize>,
    /// Width of the recurrent learner's input projection and LSTM state.
    pub lstm_hidden: usize,
    pub adam_epsilon: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self::ppo()
    }
}

impl Hyperparams {
    pub fn ppo() -> Self {
        Self {
            n_steps: 2048,
            epochs: 10,
            minibatch_size: 64,
            learning_rate: 0.003,
            clip_range: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            vf_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            normalize_advantage: true,
            stats_window_size: 100,
            hidden_sizes: vec![64, 64],
            lstm_hidden: 64,
            adam_epsilon: 1e-8,
        }
    }

    pub fn rppo() -> Self {
        Self {
            n_steps: 128,
            minibatch_size: 128,
            ..Self::ppo()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            epsilon: self.adam_epsilon,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_range > 0.0) {
            return bad("clip_range must be > 0");
        }
        if self.n_steps == 0 || self.epochs == 0 || self.minibatch_size == 0 {
            return bad("n_steps, epochs and minibatch_size must be >= 1");
        }
        if self.minibatch_size > self.n_steps {
            return bad("minibatch_size must not exceed n_steps");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be > 0");
        }
        if self.stats_window_size == 0 || self.lstm_hidden == 0 {
            return bad("stats_window_size and lstm_hidden must be >= 1");
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden layer widths must be >= 1");
        }
        Ok(())
    }

    /// Sets one field from its textual value, e.g. `("learning_rate", "0.001")`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
        }
        match key {
            "n_steps" => self.n_steps = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "minibatch_size" | "batch_size" => self.minibatch_size = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "clip_range" => self.clip_range = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "gae_lambda" => self.gae_lambda = parse(key, value)?,
            "vf_coef" => self.vf_coef = parse(key, value)?,
            "entropy_coef" | "ent_coef" => self.entropy_coef = parse(key, value)?,
            "max_grad_norm" => self.max_grad_norm = parse(key, value)?,
            "normalize_advantage" => self.normalize_advantage = parse(key, value)?,
            "stats_window_size" => self.stats_window_size = parse(key, value)?,
            "lstm_hidden" => self.lstm_hidden = parse(key, value)?,
            "adam_epsilon" => self.adam_epsilon = parse(key, value)?,
            "hidden_sizes" => {
                self.hidden_sizes = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            _ => return Err(Error::Config(format!("unknown hyperparameter {key:?}"))),
        }
        Ok(())
    }
}
