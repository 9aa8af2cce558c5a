use rand::Rng;

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - max - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Index of the largest logit; ties resolve to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (k, &z) in logits.iter().enumerate().skip(1) {
        if z > logits[best] {
            best = k;
        }
    }
    best
}

/// Samples an index by inverse CDF. Returns `(index, log_probability)`.
pub fn categorical_sample<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    let logp = log_softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = None;
    for (k, lp) in logp.iter().enumerate() {
        let p = lp.exp();
        acc += p;
        if p > 0.0 {
            chosen = Some(k);
            if u < acc {
                break;
            }
        }
    }
    let k = chosen.expect("at least one category has positive probability");
    (k, logp[k])
}

/// `(log_probability of index, entropy)`.
pub fn categorical_stats(logits: &[f64], index: usize) -> (f64, f64) {
    let logp = log_softmax(logits);
    let entropy = -logp.iter().map(|lp| lp.exp() * lp).sum::<f64>();
    (logp[index], entropy)
}

/// Gradient with respect to the logits of
/// `d_logp * log p(index) + d_entropy * H`.
pub fn categorical_grad(logits: &[f64], index: usize, d_logp: f64, d_entropy: f64) -> Vec<f64> {
    let logp = log_softmax(logits);
    let entropy = -logp.iter().map(|lp| lp.exp() * lp).sum::<f64>();
    logp.iter()
        .enumerate()
        .map(|(k, &lp)| {
            let p = lp.exp();
            let onehot = if k == index { 1.0 } else { 0.0 };
            d_logp * (onehot - p) - d_entropy * p * (lp + entropy)
        })
        .collect()
}
