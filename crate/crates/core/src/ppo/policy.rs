use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Observation, OBS_DIM};
use crate::error::Result;
use crate::nn::{
    argmax, categorical_sample, categorical_stats, init_uniform, Activation, DenseCache,
    DenseLayer, Mlp, MlpCache,
};

/// Action heads: Q_0, Q_1, Q_2, R_0.
pub const HEADS: usize = 4;

/// Feed-forward actor-critic: a shared tanh trunk feeding four categorical
/// heads and a scalar value head.
///
/// Parameter layout: trunk, then heads in order, then the value head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorCritic {
    pub trunk: Mlp,
    pub heads: [DenseLayer; HEADS],
    pub value: DenseLayer,
    pub params: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PolicyForward {
    pub logits: [Vec<f64>; HEADS],
    pub value: f64,
    trunk: MlpCache,
    heads: [DenseCache; HEADS],
    value_cache: DenseCache,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActOutput {
    pub actions: [usize; HEADS],
    pub log_prob: f64,
    pub value: f64,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(hidden: &[usize], head_sizes: [usize; HEADS], rng: &mut R) -> Self {
        let trunk = Mlp::new(OBS_DIM, hidden, Activation::Tanh);
        let features = if hidden.is_empty() {
            OBS_DIM
        } else {
            trunk.output_dim()
        };
        let heads = head_sizes.map(|n| DenseLayer::new(features, n, Activation::Identity));
        let value = DenseLayer::new(features, 1, Activation::Identity);
        let mut net = Self {
            trunk,
            heads,
            value,
            params: Vec::new(),
        };
        net.params = vec![0.0; net.num_params()];
        net.init(rng);
        net
    }

    fn init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut layers: Vec<DenseLayer> = self.trunk.layers.clone();
        layers.extend(self.heads);
        layers.push(self.value);
        let mut off = 0;
        for l in layers {
            let nw = l.input * l.output;
            init_uniform(&mut self.params[off..off + nw], l.input, rng);
            // biases start at zero
            off += l.num_params();
        }
    }

    pub fn num_params(&self) -> usize {
        self.trunk.num_params()
            + self.heads.iter().map(DenseLayer::num_params).sum::<usize>()
            + self.value.num_params()
    }

    fn head_offsets(&self) -> ([usize; HEADS], usize) {
        let mut off = self.trunk.num_params();
        let mut out = [0; HEADS];
        for (k, h) in self.heads.iter().enumerate() {
            out[k] = off;
            off += h.num_params();
        }
        (out, off)
    }

    /// Forward pass with an explicit parameter vector laid out like `self.params`.
    pub fn forward_with(&self, params: &[f64], obs: &Observation) -> Result<PolicyForward> {
        let trunk = self.trunk.forward(params, obs)?;
        let features = trunk.output().to_vec();
        let (head_off, value_off) = self.head_offsets();
        let mut heads: [DenseCache; HEADS] = Default::default();
        for k in 0..HEADS {
            heads[k] = self.heads[k].forward(&params[head_off[k]..], &features)?;
        }
        let value_cache = self.value.forward(&params[value_off..], &features)?;
        Ok(PolicyForward {
            logits: heads.clone().map(|c| c.output),
            value: value_cache.output[0],
            trunk,
            heads,
            value_cache,
        })
    }

    pub fn forward(&self, obs: &Observation) -> Result<PolicyForward> {
        self.forward_with(&self.params, obs)
    }

    /// Accumulates the gradient for upstream gradients on the logits and value.
    pub fn backward_with(
        &self,
        params: &[f64],
        fwd: &PolicyForward,
        d_logits: &[Vec<f64>; HEADS],
        d_value: f64,
        grad: &mut [f64],
    ) {
        let (head_off, value_off) = self.head_offsets();
        let mut d_feat = self.value.backward(
            &params[value_off..],
            &fwd.value_cache,
            &[d_value],
            &mut grad[value_off..],
        );
        for k in 0..HEADS {
            let d = self.heads[k].backward(
                &params[head_off[k]..],
                &fwd.heads[k],
                &d_logits[k],
                &mut grad[head_off[k]..],
            );
            d_feat.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
        if !self.trunk.layers.is_empty() {
            self.trunk.backward(params, &fwd.trunk, &d_feat, grad);
        }
    }

    /// Samples (or, when `deterministic`, takes the argmax of) every head.
    /// The joint log-probability is the sum over heads.
    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &Observation,
        rng: &mut R,
        deterministic: bool,
    ) -> Result<ActOutput> {
        let fwd = self.forward(obs)?;
        Ok(act_from_logits(&fwd.logits, fwd.value, rng, deterministic))
    }

    pub fn value(&self, obs: &Observation) -> Result<f64> {
        Ok(self.forward(obs)?.value)
    }
}

pub(crate) fn act_from_logits<R: Rng + ?Sized>(
    logits: &[Vec<f64>; HEADS],
    value: f64,
    rng: &mut R,
    deterministic: bool,
) -> ActOutput {
    let mut actions = [0; HEADS];
    let mut log_prob = 0.0;
    for k in 0..HEADS {
        let (a, lp) = if deterministic {
            let a = argmax(&logits[k]);
            (a, categorical_stats(&logits[k], a).0)
        } else {
            categorical_sample(&logits[k], rng)
        };
        actions[k] = a;
        log_prob += lp;
    }
    ActOutput {
        actions,
        log_prob,
        value,
    }
}
