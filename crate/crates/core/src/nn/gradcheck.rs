use crate::exec::Execution;

/// Denominator floor for relative errors, so that entries whose true
/// gradient is zero compare on an absolute scale.
const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
}

/// Central differences `(f(p + h e_k) - f(p - h e_k)) / 2h` for every `k`.
pub fn numeric_gradient<F: FnMut(&[f64]) -> f64>(mut loss: F, params: &[f64], h: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + h;
            let up = loss(&p);
            p[k] = orig - h;
            let down = loss(&p);
            p[k] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Central-difference stencil.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(+h) - f(-h)) / 2h`, error O(h^2).
    ThreePoint,
    /// `(f(-2h) - 8 f(-h) + 8 f(+h) - f(+2h)) / 12h`, error O(h^4).
    FivePoint,
}

/// Central differences with coordinates spread over `mode`. Each worker
/// perturbs its own copy of `params`; the result is identical in both modes.
pub fn numeric_gradient_with<F>(
    mode: Execution,
    stencil: Stencil,
    loss: F,
    params: &[f64],
    h: f64,
) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    const BLOCK: usize = 64;
    let blocks = params.len().div_ceil(BLOCK);
    mode.map_range(blocks, |b| {
        let mut p = params.to_vec();
        let end = ((b + 1) * BLOCK).min(params.len());
        (b * BLOCK..end)
            .map(|k| {
                let orig = p[k];
                let mut at = |d: f64| {
                    p[k] = orig + d;
                    loss(&p)
                };
                let g = match stencil {
                    Stencil::ThreePoint => (at(h) - at(-h)) / (2.0 * h),
                    Stencil::FivePoint => {
                        (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h)
                    }
                };
                p[k] = orig;
                g
            })
            .collect::<Vec<f64>>()
    })
    .concat()
}

/// `max_k |a_k - n_k| / max(|a_k|, |n_k|, 1e-6)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    worst(analytic, numeric).0
}

fn worst(analytic: &[f64], numeric: &[f64]) -> (f64, usize) {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR))
        .enumerate()
        .fold(
            (0.0, 0),
            |(best, bi), (k, e)| if e > best { (e, k) } else { (best, bi) },
        )
}

/// Compares an analytic gradient with central finite differences of `loss`.
pub fn grad_check<F: FnMut(&[f64]) -> f64>(
    loss: F,
    params: &[f64],
    analytic: &[f64],
    h: f64,
) -> GradCheckReport {
    let numeric = numeric_gradient(loss, params, h);
    let (max_relative_error, worst_index) = worst(analytic, &numeric);
    GradCheckReport {
        max_relative_error,
        worst_index,
    }
}
