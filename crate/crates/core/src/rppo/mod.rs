//! Recurrent PPO: a tanh input projection feeding a single LSTM layer whose
//! output drives the action heads and the value head.
//!
//! The hidden state is carried across rollout boundaries within an episode
//! and zeroed exactly at episode starts. Each update replays the stored
//! window through the LSTM from its stored initial state and backpropagates
//! through the whole window.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionVector, EnvConfig, Observation, OBS_DIM};
use crate::error::{Error, Result};
use crate::nn::{
    categorical_stats, clip_grad_norm, init_uniform, lstm_bptt, lstm_forward_sequence, Activation,
    Adam, DenseCache, DenseLayer, LstmCache, LstmCell,
};
use crate::ppo::{
    normalize_advantages, sample_loss, sample_terms, ActOutput, EpisodeRewardWindow, Hyperparams,
    LossTerms, RolloutBuffer, Transition, UpdateStats, HEADS,
};
use crate::rng::{stream, SimRng};
use crate::runner::EnvRunner;

/// Parameter layout: projection, LSTM cell, heads in order, value head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrentActorCritic {
    pub projection: DenseLayer,
    pub cell: LstmCell,
    pub heads: [DenseLayer; HEADS],
    pub value: DenseLayer,
    pub params: Vec<f64>,
}

struct Offsets {
    cell: usize,
    heads: [usize; HEADS],
    value: usize,
}

pub struct RecurrentAct {
    pub act: ActOutput,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub logits: [Vec<f64>; HEADS],
}

impl RecurrentActorCritic {
    pub fn new<R: Rng + ?Sized>(hidden: usize, head_sizes: [usize; HEADS], rng: &mut R) -> Self {
        let projection = DenseLayer::new(OBS_DIM, hidden, Activation::Tanh);
        let cell = LstmCell::new(hidden, hidden);
        let heads = head_sizes.map(|n| DenseLayer::new(hidden, n, Activation::Identity));
        let value = DenseLayer::new(hidden, 1, Activation::Identity);
        let mut net = Self {
            projection,
            cell,
            heads,
            value,
            params: Vec::new(),
        };
        net.params = vec![0.0; net.num_params()];
        let off = net.offsets();
        let nw = OBS_DIM * hidden;
        init_uniform(&mut net.params[..nw], OBS_DIM, rng);
        // W and U blocks; the 4H biases stay at zero
        let lstm_weights = 4 * hidden * (2 * hidden);
        init_uniform(
            &mut net.params[off.cell..off.cell + lstm_weights],
            hidden,
            rng,
        );
        for (k, h) in net.heads.iter().enumerate() {
            let nw = h.input * h.output;
            init_uniform(
                &mut net.params[off.heads[k]..off.heads[k] + nw],
                hidden,
                rng,
            );
        }
        init_uniform(&mut net.params[off.value..off.value + hidden], hidden, rng);
        net
    }

    pub fn hidden(&self) -> usize {
        self.cell.hidden
    }

    pub fn num_params(&self) -> usize {
        self.projection.num_params()
            + self.cell.num_params()
            + self.heads.iter().map(DenseLayer::num_params).sum::<usize>()
            + self.value.num_params()
    }

    fn offsets(&self) -> Offsets {
        let cell = self.projection.num_params();
        let mut off = cell + self.cell.num_params();
        let mut heads = [0; HEADS];
        for (k, h) in self.heads.iter().enumerate() {
            heads[k] = off;
            off += h.num_params();
        }
        Offsets {
            cell,
            heads,
            value: off,
        }
    }

    fn project(&self, params: &[f64], obs: &Observation) -> Result<DenseCache> {
        self.projection.forward(params, obs)
    }

    fn outputs(&self, params: &[f64], h: &[f64]) -> Result<([DenseCache; HEADS], DenseCache)> {
        let off = self.offsets();
        let mut heads: [DenseCache; HEADS] = Default::default();
        for k in 0..HEADS {
            heads[k] = self.heads[k].forward(&params[off.heads[k]..], h)?;
        }
        let value = self.value.forward(&params[off.value..], h)?;
        Ok((heads, value))
    }

    /// One LSTM step followed by the heads. Returns the advanced state.
    pub fn recurrent_act<R: Rng + ?Sized>(
        &self,
        obs: &Observation,
        h: &[f64],
        c: &[f64],
        rng: &mut R,
        deterministic: bool,
    ) -> Result<RecurrentAct> {
        if h.len() != self.hidden() || c.len() != self.hidden() {
            return Err(Error::Usage(format!(
                "hidden state must have length {}",
                self.hidden()
            )));
        }
        let off = self.offsets();
        let z = self.project(&self.params, obs)?;
        let step = self.cell.step(&self.params[off.cell..], &z.output, h, c);
        let (heads, value) = self.outputs(&self.params, &step.h)?;
        let logits = heads.map(|c| c.output);
        let act = crate::ppo::act_from_logits(&logits, value.output[0], rng, deterministic);
        Ok(RecurrentAct {
            act,
            h: step.h,
            c: step.c,
            logits,
        })
    }

    pub fn value(&self, obs: &Observation, h: &[f64], c: &[f64]) -> Result<f64> {
        let off = self.offsets();
        let z = self.project(&self.params, obs)?;
        let step = self.cell.step(&self.params[off.cell..], &z.output, h, c);
        let (_, value) = self.outputs(&self.params, &step.h)?;
        Ok(value.output[0])
    }
}

/// Rollout storage plus the recurrent state at the start of every step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecurrentRolloutBuffer {
    pub base: RolloutBuffer,
    pub hidden_h: Vec<Vec<f64>>,
    pub hidden_c: Vec<Vec<f64>>,
    pub episode_starts: Vec<bool>,
}

impl RecurrentRolloutBuffer {
    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RppoLearner {
    pub hp: Hyperparams,
    pub policy: RecurrentActorCritic,
    pub adam: Adam,
    pub action_rng: SimRng,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub episode_start: bool,
}

impl RppoLearner {
    pub fn new(hp: Hyperparams, env: &EnvConfig, seed: u64) -> Result<Self> {
        hp.validate()?;
        if hp.minibatch_size != hp.n_steps {
            return Err(Error::Config(
                "recurrent learner trains on the whole window: minibatch_size must equal n_steps"
                    .into(),
            ));
        }
        let mut init_rng = SimRng::new(seed, stream::POLICY_INIT);
        let policy = RecurrentActorCritic::new(hp.lstm_hidden, env.head_sizes(), &mut init_rng);
        let adam = Adam::new(hp.adam(), policy.num_params());
        let hidden = hp.lstm_hidden;
        Ok(Self {
            hp,
            policy,
            adam,
            action_rng: SimRng::new(seed, stream::ACTION),
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
            episode_start: true,
        })
    }

    pub fn iterate(
        &mut self,
        runner: &mut EnvRunner,
        window: &mut EpisodeRewardWindow,
    ) -> Result<UpdateStats> {
        let mut buffer = collect_recurrent_rollout(self, runner, window)?;
        buffer.base.compute_gae(self.hp.gamma, self.hp.gae_lambda);
        recurrent_update(self, &buffer)
    }
}

pub fn collect_recurrent_rollout(
    learner: &mut RppoLearner,
    runner: &mut EnvRunner,
    window: &mut EpisodeRewardWindow,
) -> Result<RecurrentRolloutBuffer> {
    let n = learner.hp.n_steps;
    let hidden = learner.policy.hidden();
    let mut buf = RecurrentRolloutBuffer::default();
    for _ in 0..n {
        if learner.episode_start {
            learner.h = vec![0.0; hidden];
            learner.c = vec![0.0; hidden];
        }
        let obs = runner.observation();
        let out = learner.policy.recurrent_act(
            &obs,
            &learner.h,
            &learner.c,
            &mut learner.action_rng,
            false,
        )?;
        let step = runner.step(ActionVector::from_indices(out.act.actions), window)?;
        buf.hidden_h.push(std::mem::take(&mut learner.h));
        buf.hidden_c.push(std::mem::take(&mut learner.c));
        buf.episode_starts.push(learner.episode_start);
        buf.base.transitions.push(Transition {
            observation: obs,
            actions: out.act.actions,
            log_prob: out.act.log_prob,
            reward: step.result.reward,
            value: out.act.value,
            done: step.result.done,
        });
        learner.h = out.h;
        learner.c = out.c;
        learner.episode_start = step.result.done;
    }
    buf.base.bootstrap_value = if learner.episode_start {
        0.0
    } else {
        learner
            .policy
            .value(&runner.observation(), &learner.h, &learner.c)?
    };
    Ok(buf)
}

struct Replay {
    projections: Vec<DenseCache>,
    lstm: Vec<LstmCache>,
    heads: Vec<[DenseCache; HEADS]>,
    values: Vec<DenseCache>,
}

fn replay(
    policy: &RecurrentActorCritic,
    params: &[f64],
    buf: &RecurrentRolloutBuffer,
) -> Result<Replay> {
    let off = policy.offsets();
    let projections = buf
        .base
        .transitions
        .iter()
        .map(|t| policy.project(params, &t.observation))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<Vec<f64>> = projections.iter().map(|p| p.output.clone()).collect();
    let zeros = vec![0.0; policy.hidden()];
    let (h0, c0) = match (buf.hidden_h.first(), buf.hidden_c.first()) {
        (Some(h), Some(c)) => (h.as_slice(), c.as_slice()),
        _ => (zeros.as_slice(), zeros.as_slice()),
    };
    let lstm = lstm_forward_sequence(
        &policy.cell,
        &params[off.cell..],
        &xs,
        h0,
        c0,
        &buf.episode_starts,
    );
    let mut heads = Vec::with_capacity(lstm.len());
    let mut values = Vec::with_capacity(lstm.len());
    for step in &lstm {
        let (h, v) = policy.outputs(params, &step.h)?;
        heads.push(h);
        values.push(v);
    }
    Ok(Replay {
        projections,
        lstm,
        heads,
        values,
    })
}

/// Loss terms and gradient of the mean total loss over the whole window,
/// evaluated at `params` with BPTT through the replayed sequence.
pub fn recurrent_window_loss(
    policy: &RecurrentActorCritic,
    params: &[f64],
    buf: &RecurrentRolloutBuffer,
    advantages: &[f64],
    hp: &Hyperparams,
) -> Result<(LossTerms, Vec<f64>)> {
    let off = policy.offsets();
    let rep = replay(policy, params, buf)?;
    let n = buf.len();
    let mut grad = vec![0.0; params.len()];
    let mut terms = LossTerms::default();
    let mut dh_out = Vec::with_capacity(n);
    for t in 0..n {
        let tr = &buf.base.transitions[t];
        let logits: [Vec<f64>; HEADS] = std::array::from_fn(|k| rep.heads[t][k].output.clone());
        let (s, g) = sample_loss(
            &logits,
            rep.values[t].output[0],
            &tr.actions,
            tr.log_prob,
            advantages[t],
            buf.base.returns[t],
            hp.clip_range,
            hp.vf_coef,
            hp.entropy_coef,
            n,
        );
        terms.add(&s);
        let mut dh = policy.value.backward(
            &params[off.value..],
            &rep.values[t],
            &[g.d_value],
            &mut grad[off.value..],
        );
        for k in 0..HEADS {
            let d = policy.heads[k].backward(
                &params[off.heads[k]..],
                &rep.heads[t][k],
                &g.d_logits[k],
                &mut grad[off.heads[k]..],
            );
            dh.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
        dh_out.push(dh);
    }
    let (cell_params, cell_grad) = (&params[off.cell..], &mut grad[off.cell..]);
    let dxs = lstm_bptt(
        &policy.cell,
        cell_params,
        &rep.lstm,
        &buf.episode_starts,
        &dh_out,
        cell_grad,
    );
    for (cache, dx) in rep.projections.iter().zip(&dxs) {
        policy.projection.backward(params, cache, dx, &mut grad);
    }
    Ok((terms, grad))
}

/// Loss terms over the whole window at `params`, forward replay only.
pub fn recurrent_window_terms(
    policy: &RecurrentActorCritic,
    params: &[f64],
    buf: &RecurrentRolloutBuffer,
    advantages: &[f64],
    hp: &Hyperparams,
) -> Result<LossTerms> {
    let rep = replay(policy, params, buf)?;
    let mut terms = LossTerms::default();
    for (t, tr) in buf.base.transitions.iter().enumerate() {
        let logits: [Vec<f64>; HEADS] = std::array::from_fn(|k| rep.heads[t][k].output.clone());
        terms.add(&sample_terms(
            &logits,
            rep.values[t].output[0],
            &tr.actions,
            tr.log_prob,
            advantages[t],
            buf.base.returns[t],
            hp.clip_range,
        ));
    }
    Ok(terms)
}

/// Window advantages, normalized when configured.
pub fn window_advantages(buf: &RecurrentRolloutBuffer, hp: &Hyperparams) -> Vec<f64> {
    if hp.normalize_advantage {
        normalize_advantages(&buf.base.advantages)
    } else {
        buf.base.advantages.clone()
    }
}

/// `epochs` full-window passes, each one BPTT gradient, norm clip and Adam step.
pub fn recurrent_update(
    learner: &mut RppoLearner,
    buf: &RecurrentRolloutBuffer,
) -> Result<UpdateStats> {
    let hp = learner.hp.clone();
    let adv = window_advantages(buf, &hp);
    let mut stats = UpdateStats::default();
    for epoch in 0..hp.epochs {
        let (terms, mut grad) =
            recurrent_window_loss(&learner.policy, &learner.policy.params, buf, &adv, &hp)?;
        let total = terms.total(hp.vf_coef, hp.entropy_coef);
        if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "recurrent epoch {epoch}: policy_loss={} value_loss={} entropy={} total={total}",
                terms.policy_loss(),
                terms.value_loss(),
                terms.mean_entropy()
            )));
        }
        let norm = clip_grad_norm(&mut grad, hp.max_grad_norm);
        learner.adam.update(&mut learner.policy.params, &grad);
        stats.accumulate(&terms, norm);
    }
    Ok(stats.finish())
}

/// Replays the stored window with current parameters and returns the
/// probability ratio of every sample.
pub fn replay_ratios(
    policy: &RecurrentActorCritic,
    buf: &RecurrentRolloutBuffer,
) -> Result<Vec<f64>> {
    let rep = replay(policy, &policy.params, buf)?;
    Ok(buf
        .base
        .transitions
        .iter()
        .zip(&rep.heads)
        .map(|(t, heads)| {
            let lp: f64 = (0..HEADS)
                .map(|k| categorical_stats(&heads[k].output, t.actions[k]).0)
                .sum();
            (lp - t.log_prob).exp()
        })
        .collect())
}
