//! Test-side oracles, written independently of the library code paths.
#![allow(dead_code)]

/// Brute-force trace of the all-zero-order policy on constant demand 2
/// starting from retailer stock 10 and empty upstream echelons. Nothing is
/// ever ordered (the reorder point stays 0), so only sales and costs move.
///
/// Returns per-step rewards and the zero-based index of the final day.
pub fn all_zero_sto0_trace() -> (Vec<i64>, i64) {
    let mut i0: i64 = 10;
    let mut stockouts = 0;
    let mut rewards = Vec::new();
    let mut day = 0;
    loop {
        let demand = 2;
        let sold = demand.min(i0);
        i0 -= sold;
        let lost = demand - sold;
        if lost > 0 {
            stockouts += 1;
        }
        rewards.push(-10_000 * lost - 1_000 * i0);
        if stockouts > 3 || day + 1 > 30 {
            return (rewards, day);
        }
        day += 1;
    }
}

/// Integer re-implementation of the shared cost with the default table
/// constants.
pub fn reward_oracle(i: [i64; 3], d: i64) -> i64 {
    let short = if d > i[0] { d - i[0] } else { 0 };
    let hold = |x: i64| if x > 30 { 30 } else { x };
    -(10_000 * short + 1_000 * hold(i[0]) + 5 * hold(i[1]) + 1_000 * hold(i[2]))
}

/// Advantage as an explicit double sum: `A_t = sum_l (gamma lambda)^l delta_{t+l}`,
/// truncated after the first terminal transition at or after `t`.
pub fn gae_double_sum(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let delta = |k: usize| {
        let next = if dones[k] {
            0.0
        } else if k + 1 < n {
            values[k + 1]
        } else {
            bootstrap
        };
        rewards[k] + gamma * next - values[k]
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for k in t..n {
                sum += (gamma * lambda).powi((k - t) as i32) * delta(k);
                if dones[k] {
                    break;
                }
            }
            sum
        })
        .collect()
}
