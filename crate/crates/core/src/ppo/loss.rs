//! Per-sample clipped-surrogate, value and entropy terms with their
//! gradients. Shared by the feed-forward and recurrent learners.

use serde::{Deserialize, Serialize};

use super::policy::HEADS;
use crate::nn::{categorical_grad, categorical_stats};

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Shift to mean 0 and scale by the sample standard deviation.
/// Batches of one are returned unchanged.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len();
    if n <= 1 {
        return adv.to_vec();
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

/// Summed (not yet averaged) loss terms over a set of samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub surrogate: f64,
    pub squared_error: f64,
    pub entropy: f64,
    pub clipped: f64,
    pub count: f64,
}

impl LossTerms {
    pub fn add(&mut self, o: &LossTerms) {
        self.surrogate += o.surrogate;
        self.squared_error += o.squared_error;
        self.entropy += o.entropy;
        self.clipped += o.clipped;
        self.count += o.count;
    }

    pub fn policy_loss(&self) -> f64 {
        -self.surrogate / self.count
    }

    pub fn value_loss(&self) -> f64 {
        self.squared_error / self.count
    }

    pub fn mean_entropy(&self) -> f64 {
        self.entropy / self.count
    }

    pub fn clip_fraction(&self) -> f64 {
        self.clipped / self.count
    }

    /// `-J_clip + vf_coef * MSE - entropy_coef * H`.
    pub fn total(&self, vf_coef: f64, entropy_coef: f64) -> f64 {
        self.policy_loss() + vf_coef * self.value_loss() - entropy_coef * self.mean_entropy()
    }
}

pub struct SampleGrads {
    pub d_logits: [Vec<f64>; HEADS],
    pub d_value: f64,
}

/// Loss terms of one sample and its probability ratio.
fn terms_and_ratio(
    logits: &[Vec<f64>; HEADS],
    value: f64,
    actions: &[usize; HEADS],
    old_log_prob: f64,
    advantage: f64,
    target_return: f64,
    clip_range: f64,
) -> (LossTerms, f64) {
    let mut log_prob = 0.0;
    let mut entropy = 0.0;
    for k in 0..HEADS {
        let (lp, h) = categorical_stats(&logits[k], actions[k]);
        log_prob += lp;
        entropy += h;
    }
    let ratio = (log_prob - old_log_prob).exp();
    let err = value - target_return;
    let terms = LossTerms {
        surrogate: clipped_surrogate(ratio, advantage, clip_range),
        squared_error: err * err,
        entropy,
        clipped: if (ratio - 1.0).abs() > clip_range {
            1.0
        } else {
            0.0
        },
        count: 1.0,
    };
    (terms, ratio)
}

/// Loss terms of one sample without gradients.
pub fn sample_terms(
    logits: &[Vec<f64>; HEADS],
    value: f64,
    actions: &[usize; HEADS],
    old_log_prob: f64,
    advantage: f64,
    target_return: f64,
    clip_range: f64,
) -> LossTerms {
    terms_and_ratio(
        logits,
        value,
        actions,
        old_log_prob,
        advantage,
        target_return,
        clip_range,
    )
    .0
}

/// Loss terms of one sample and the gradient of the batch-mean total loss
/// with respect to its logits and value.
#[allow(clippy::too_many_arguments)]
pub fn sample_loss(
    logits: &[Vec<f64>; HEADS],
    value: f64,
    actions: &[usize; HEADS],
    old_log_prob: f64,
    advantage: f64,
    target_return: f64,
    clip_range: f64,
    vf_coef: f64,
    entropy_coef: f64,
    batch: usize,
) -> (LossTerms, SampleGrads) {
    let inv = 1.0 / batch as f64;
    let (terms, ratio) = terms_and_ratio(
        logits,
        value,
        actions,
        old_log_prob,
        advantage,
        target_return,
        clip_range,
    );
    let unclipped_active = ratio * advantage <= terms.surrogate;
    let d_surr_d_ratio = if unclipped_active { advantage } else { 0.0 };
    let d_log_prob = -inv * d_surr_d_ratio * ratio;
    let d_entropy = -inv * entropy_coef;
    let d_logits =
        std::array::from_fn(|k| categorical_grad(&logits[k], actions[k], d_log_prob, d_entropy));
    let grads = SampleGrads {
        d_logits,
        d_value: inv * vf_coef * 2.0 * (value - target_return),
    };
    (terms, grads)
}
