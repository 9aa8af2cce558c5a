use serde::{Deserialize, Serialize};

use crate::env::Observation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observation: Observation,
    /// Head indices for Q_0, Q_1, Q_2, R_0.
    pub actions: [usize; 4],
    /// Joint log-probability under the collecting policy.
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    /// The episode ended on this transition.
    pub done: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    /// Value of the state following the last transition (0 if it was terminal).
    pub bootstrap_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn compute_gae(&mut self, gamma: f64, lambda: f64) {
        let rewards: Vec<f64> = self.transitions.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = self.transitions.iter().map(|t| t.value).collect();
        let dones: Vec<bool> = self.transitions.iter().map(|t| t.done).collect();
        let (adv, ret) = compute_gae(
            &rewards,
            &values,
            &dones,
            self.bootstrap_value,
            gamma,
            lambda,
        );
        self.advantages = adv;
        self.returns = ret;
    }
}

/// Generalized advantage estimation by backward recursion.
///
/// `dones[t]` marks that the episode ended on transition `t`, so nothing
/// is bootstrapped across it. Returns `(advantages, returns)` with
/// `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n {
            values[t + 1]
        } else {
            bootstrap_value
        };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        next_adv = delta + gamma * lambda * not_done * next_adv;
        adv[t] = next_adv;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}
