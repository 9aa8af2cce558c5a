use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::buffer::{RolloutBuffer, Transition};
use super::hyper::Hyperparams;
use super::loss::{normalize_advantages, sample_loss, sample_terms, LossTerms};
use super::policy::{ActorCritic, HEADS};
use super::EpisodeRewardWindow;
use crate::env::{ActionVector, EnvConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nn::{categorical_stats, clip_grad_norm, Adam};
use crate::rng::{stream, SimRng};
use crate::runner::EnvRunner;

/// Samples per independently reduced gradient chunk. The chunking is fixed
/// so parallel and sequential runs sum in the same order.
const GRAD_CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Mean pre-clipping gradient norm.
    pub grad_norm: f64,
    /// Clip fraction of the very first minibatch, before any optimizer step.
    pub first_clip_fraction: f64,
    pub minibatches: usize,
}

impl UpdateStats {
    pub(crate) fn accumulate(&mut self, terms: &LossTerms, grad_norm: f64) {
        if self.minibatches == 0 {
            self.first_clip_fraction = terms.clip_fraction();
        }
        self.policy_loss += terms.policy_loss();
        self.value_loss += terms.value_loss();
        self.entropy += terms.mean_entropy();
        self.clip_fraction += terms.clip_fraction();
        self.grad_norm += grad_norm;
        self.minibatches += 1;
    }

    pub(crate) fn finish(mut self) -> Self {
        let n = self.minibatches.max(1) as f64;
        self.policy_loss /= n;
        self.value_loss /= n;
        self.entropy /= n;
        self.clip_fraction /= n;
        self.grad_norm /= n;
        self
    }
}

/// Feed-forward PPO learner state: policy, optimizer and its random streams.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoLearner {
    pub hp: Hyperparams,
    pub policy: ActorCritic,
    pub adam: Adam,
    pub action_rng: SimRng,
    pub shuffle_rng: SimRng,
}

impl PpoLearner {
    pub fn new(hp: Hyperparams, env: &EnvConfig, seed: u64) -> Result<Self> {
        hp.validate()?;
        let mut init_rng = SimRng::new(seed, stream::POLICY_INIT);
        let policy = ActorCritic::new(&hp.hidden_sizes, env.head_sizes(), &mut init_rng);
        let adam = Adam::new(hp.adam(), policy.num_params());
        Ok(Self {
            hp,
            policy,
            adam,
            action_rng: SimRng::new(seed, stream::ACTION),
            shuffle_rng: SimRng::new(seed, stream::SHUFFLE),
        })
    }

    /// One collect / advantage / update cycle.
    pub fn iterate(
        &mut self,
        runner: &mut EnvRunner,
        window: &mut EpisodeRewardWindow,
        mode: Execution,
    ) -> Result<UpdateStats> {
        let mut buffer = collect_rollout(self, runner, window)?;
        buffer.compute_gae(self.hp.gamma, self.hp.gae_lambda);
        ppo_update(self, &buffer, mode)
    }
}

/// Runs the current policy for exactly `n_steps` transitions. Episodes reset
/// automatically; completed episode rewards go into `window`.
pub fn collect_rollout(
    learner: &mut PpoLearner,
    runner: &mut EnvRunner,
    window: &mut EpisodeRewardWindow,
) -> Result<RolloutBuffer> {
    let n = learner.hp.n_steps;
    let mut transitions = Vec::with_capacity(n);
    for _ in 0..n {
        let obs = runner.observation();
        let out = learner.policy.act(&obs, &mut learner.action_rng, false)?;
        let step = runner.step(ActionVector::from_indices(out.actions), window)?;
        transitions.push(Transition {
            observation: obs,
            actions: out.actions,
            log_prob: out.log_prob,
            reward: step.result.reward,
            value: out.value,
            done: step.result.done,
        });
    }
    let last_done = transitions.last().is_some_and(|t| t.done);
    let bootstrap_value = if last_done {
        0.0
    } else {
        learner.policy.value(&runner.observation())?
    };
    Ok(RolloutBuffer {
        transitions,
        bootstrap_value,
        advantages: Vec::new(),
        returns: Vec::new(),
    })
}

/// One epoch's shuffled minibatches; every index appears exactly once.
pub fn minibatch_order(n: usize, minibatch_size: usize, rng: &mut SimRng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(minibatch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

/// Summed loss terms and the gradient of the mean total loss over the
/// samples `indices`, evaluated at `params`. `advantages[j]` belongs to
/// `indices[j]`.
pub fn minibatch_loss(
    policy: &ActorCritic,
    params: &[f64],
    buffer: &RolloutBuffer,
    indices: &[usize],
    advantages: &[f64],
    hp: &Hyperparams,
    mode: Execution,
) -> Result<(LossTerms, Vec<f64>)> {
    let batch = indices.len();
    let chunks: Vec<(usize, usize)> = (0..batch)
        .step_by(GRAD_CHUNK)
        .map(|s| (s, (s + GRAD_CHUNK).min(batch)))
        .collect();
    let partials = mode.map(&chunks, |&(start, end)| -> Result<(LossTerms, Vec<f64>)> {
        let mut terms = LossTerms::default();
        let mut grad = vec![0.0; params.len()];
        for j in start..end {
            let i = indices[j];
            let t = &buffer.transitions[i];
            let fwd = policy.forward_with(params, &t.observation)?;
            let (s, g) = sample_loss(
                &fwd.logits,
                fwd.value,
                &t.actions,
                t.log_prob,
                advantages[j],
                buffer.returns[i],
                hp.clip_range,
                hp.vf_coef,
                hp.entropy_coef,
                batch,
            );
            terms.add(&s);
            policy.backward_with(params, &fwd, &g.d_logits, g.d_value, &mut grad);
        }
        Ok((terms, grad))
    });
    let mut terms = LossTerms::default();
    let mut grad = vec![0.0; params.len()];
    for part in partials {
        let (t, g) = part?;
        terms.add(&t);
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok((terms, grad))
}

/// Summed loss terms over `indices` at `params`, forward pass only.
pub fn minibatch_terms(
    policy: &ActorCritic,
    params: &[f64],
    buffer: &RolloutBuffer,
    indices: &[usize],
    advantages: &[f64],
    hp: &Hyperparams,
) -> Result<LossTerms> {
    let mut terms = LossTerms::default();
    for (j, &i) in indices.iter().enumerate() {
        let t = &buffer.transitions[i];
        let fwd = policy.forward_with(params, &t.observation)?;
        terms.add(&sample_terms(
            &fwd.logits,
            fwd.value,
            &t.actions,
            t.log_prob,
            advantages[j],
            buffer.returns[i],
            hp.clip_range,
        ));
    }
    Ok(terms)
}

/// Clipped-surrogate update: `epochs` passes over shuffled minibatches,
/// global gradient-norm clipping, one Adam step per minibatch.
pub fn ppo_update(
    learner: &mut PpoLearner,
    buffer: &RolloutBuffer,
    mode: Execution,
) -> Result<UpdateStats> {
    let hp = learner.hp.clone();
    let mut stats = UpdateStats::default();
    for epoch in 0..hp.epochs {
        let order = minibatch_order(buffer.len(), hp.minibatch_size, &mut learner.shuffle_rng);
        for (m, indices) in order.iter().enumerate() {
            let raw: Vec<f64> = indices.iter().map(|&i| buffer.advantages[i]).collect();
            let adv = if hp.normalize_advantage {
                normalize_advantages(&raw)
            } else {
                raw
            };
            let (terms, mut grad) = minibatch_loss(
                &learner.policy,
                &learner.policy.params,
                buffer,
                indices,
                &adv,
                &hp,
                mode,
            )?;
            let total = terms.total(hp.vf_coef, hp.entropy_coef);
            if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "epoch {epoch} minibatch {m}: policy_loss={} value_loss={} entropy={} total={total}",
                    terms.policy_loss(),
                    terms.value_loss(),
                    terms.mean_entropy()
                )));
            }
            let norm = clip_grad_norm(&mut grad, hp.max_grad_norm);
            learner.adam.update(&mut learner.policy.params, &grad);
            stats.accumulate(&terms, norm);
        }
    }
    Ok(stats.finish())
}

/// `pi_theta(a|s) / pi_old(a|s)` for every buffered sample under the
/// current parameters.
pub fn probability_ratios(policy: &ActorCritic, buffer: &RolloutBuffer) -> Result<Vec<f64>> {
    buffer
        .transitions
        .iter()
        .map(|t| {
            let fwd = policy.forward(&t.observation)?;
            let lp: f64 = (0..HEADS)
                .map(|k| categorical_stats(&fwd.logits[k], t.actions[k]).0)
                .sum();
            Ok((lp - t.log_prob).exp())
        })
        .collect()
}
