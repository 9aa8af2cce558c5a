//! Minimal dense network core.
//!
//! Layers do not own their weights. Every network keeps all of its
//! parameters in one flat `Vec<f64>` and each layer reads its slice, which
//! keeps the optimizer, gradient clipping, checkpointing and finite
//! difference checks trivial: they all operate on plain slices.

mod adam;
mod categorical;
mod dense;
mod gradcheck;
mod lstm;

pub use adam::{Adam, AdamConfig};
pub use categorical::{
    argmax, categorical_grad, categorical_sample, categorical_stats, log_softmax, softmax,
};
pub use dense::{Activation, DenseCache, DenseLayer, Mlp, MlpCache};
pub use gradcheck::{
    grad_check, max_relative_error, numeric_gradient, numeric_gradient_with, GradCheckReport,
    Stencil,
};
pub use lstm::{lstm_bptt, lstm_forward_sequence, LstmCache, LstmCell};

use rand::Rng;

/// Name of the weight initialization recorded in run metadata.
pub const INIT_SCHEME: &str = "uniform-fan-in";

/// Dot product with four independent accumulators so the loop vectorizes.
/// Summation order is fixed, so results do not depend on execution mode.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Fan-in scaled uniform initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
pub fn init_uniform<R: Rng + ?Sized>(weights: &mut [f64], fan_in: usize, rng: &mut R) {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    for w in weights {
        *w = rng.random_range(-bound..bound);
    }
}

/// Numerically stable logistic function. Saturates to exactly 0 or 1.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Scales `grads` in place so that its L2 norm does not exceed `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    let coef = max_norm / (norm + 1e-6);
    if coef < 1.0 {
        for g in grads.iter_mut() {
            *g *= coef;
        }
    }
    norm
}
