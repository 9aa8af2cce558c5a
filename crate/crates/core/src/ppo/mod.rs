//! Proximal Policy Optimization over the multi-discrete supply-chain action.

mod buffer;
mod hyper;
mod loss;
mod policy;
mod update;

pub use buffer::{compute_gae, RolloutBuffer, Transition};
pub use hyper::Hyperparams;
pub use loss::{
    clipped_surrogate, normalize_advantages, sample_loss, sample_terms, LossTerms, SampleGrads,
};
pub(crate) use policy::act_from_logits;
pub use policy::{ActOutput, ActorCritic, PolicyForward, HEADS};
pub use update::{
    collect_rollout, minibatch_loss, minibatch_order, minibatch_terms, ppo_update,
    probability_ratios, PpoLearner, UpdateStats,
};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Trailing window of completed-episode rewards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRewardWindow {
    capacity: usize,
    rewards: VecDeque<f64>,
}

impl EpisodeRewardWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            rewards: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn push(&mut self, reward: f64) {
        if self.rewards.len() == self.capacity {
            self.rewards.pop_front();
        }
        self.rewards.push_back(reward);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Arithmetic mean of the contents, `None` while empty.
    pub fn mean(&self) -> Option<f64> {
        if self.rewards.is_empty() {
            return None;
        }
        Some(self.rewards.iter().sum::<f64>() / self.rewards.len() as f64)
    }

    pub fn contents(&self) -> Vec<f64> {
        self.rewards.iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_keeps_last_entries() {
        let mut w = EpisodeRewardWindow::new(3);
        assert_eq!(w.mean(), None);
        for r in [1.0, 2.0, 3.0, 4.0, 5.0] {
            w.push(r);
        }
        assert_eq!(w.contents(), vec![3.0, 4.0, 5.0]);
        assert_eq!(w.mean(), Some(4.0));
    }
}
