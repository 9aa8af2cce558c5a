use serde::{Deserialize, Serialize};

use super::sigmoid;

/// Single-layer LSTM cell.
///
/// Parameter layout (gate blocks ordered input, forget, cell, output):
/// `W` is `4H x I`, then `U` is `4H x H`, then `b` has `4H` entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmCell {
    pub input: usize,
    pub hidden: usize,
}

#[derive(Clone, Debug, Default)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmCell {
    pub fn new(input: usize, hidden: usize) -> Self {
        Self { input, hidden }
    }

    pub fn num_params(&self) -> usize {
        4 * self.hidden * (self.input + self.hidden + 1)
    }

    fn offsets(&self) -> (usize, usize) {
        let w = 4 * self.hidden * self.input;
        let u = w + 4 * self.hidden * self.hidden;
        (w, u)
    }

    /// One step of the standard gate equations.
    pub fn step(&self, params: &[f64], x: &[f64], h: &[f64], c: &[f64]) -> LstmCache {
        let (hd, id) = (self.hidden, self.input);
        debug_assert_eq!(x.len(), id);
        debug_assert_eq!(h.len(), hd);
        debug_assert_eq!(c.len(), hd);
        let (u_off, b_off) = self.offsets();
        let w = &params[..u_off];
        let u = &params[u_off..b_off];
        let b = &params[b_off..b_off + 4 * hd];

        let mut pre = b.to_vec();
        for (r, p) in pre.iter_mut().enumerate() {
            let wr = &w[r * id..(r + 1) * id];
            let ur = &u[r * hd..(r + 1) * hd];
            *p += super::dot(wr, x) + super::dot(ur, h);
        }
        let i: Vec<f64> = pre[..hd].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = pre[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = pre[2 * hd..3 * hd].iter().map(|v| v.tanh()).collect();
        let o: Vec<f64> = pre[3 * hd..].iter().map(|&v| sigmoid(v)).collect();
        let c_new: Vec<f64> = (0..hd).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
        let h_new: Vec<f64> = (0..hd).map(|k| o[k] * tanh_c[k]).collect();
        LstmCache {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            c_prev: c.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
            h: h_new,
            c: c_new,
        }
    }

    /// Backward through one step. Accumulates into `grad_params` and returns
    /// `(dx, dh_prev, dc_prev)`.
    pub fn backward_step(
        &self,
        params: &[f64],
        cache: &LstmCache,
        dh: &[f64],
        dc: &[f64],
        grad_params: &mut [f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (hd, id) = (self.hidden, self.input);
        let (u_off, b_off) = self.offsets();
        let mut da = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for k in 0..hd {
            let (i, f, g, o, tc) = (
                cache.i[k],
                cache.f[k],
                cache.g[k],
                cache.o[k],
                cache.tanh_c[k],
            );
            let d_o = dh[k] * tc;
            let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
            da[k] = dct * g * i * (1.0 - i);
            da[hd + k] = dct * cache.c_prev[k] * f * (1.0 - f);
            da[2 * hd + k] = dct * i * (1.0 - g * g);
            da[3 * hd + k] = d_o * o * (1.0 - o);
            dc_prev[k] = dct * f;
        }
        let mut dx = vec![0.0; id];
        let mut dh_prev = vec![0.0; hd];
        for (r, &d) in da.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            axpy2(
                d,
                &cache.x,
                &params[r * id..(r + 1) * id],
                &mut grad_params[r * id..(r + 1) * id],
                &mut dx,
            );
            let ub = u_off + r * hd;
            axpy2(
                d,
                &cache.h_prev,
                &params[ub..ub + hd],
                &mut grad_params[ub..ub + hd],
                &mut dh_prev,
            );
            grad_params[b_off + r] += d;
        }
        (dx, dh_prev, dc_prev)
    }
}

/// `gw += d * x` and `dx += d * w` over one weight row.
#[inline]
fn axpy2(d: f64, x: &[f64], w: &[f64], gw: &mut [f64], dx: &mut [f64]) {
    for ((g, xi), (dxi, wi)) in gw.iter_mut().zip(x).zip(dx.iter_mut().zip(w)) {
        *g += d * xi;
        *dxi += wi * d;
    }
}

/// Runs the cell over a sequence. `resets[t]` zeroes the state before step
/// `t`; the caller's `(h0, c0)` is used only when `resets[0]` is false.
pub fn lstm_forward_sequence(
    cell: &LstmCell,
    params: &[f64],
    xs: &[Vec<f64>],
    h0: &[f64],
    c0: &[f64],
    resets: &[bool],
) -> Vec<LstmCache> {
    let zeros = vec![0.0; cell.hidden];
    let mut caches: Vec<LstmCache> = Vec::with_capacity(xs.len());
    for (t, x) in xs.iter().enumerate() {
        let (h, c) = if resets.get(t).copied().unwrap_or(false) {
            (&zeros[..], &zeros[..])
        } else if t == 0 {
            (h0, c0)
        } else {
            (&caches[t - 1].h[..], &caches[t - 1].c[..])
        };
        caches.push(cell.step(params, x, h, c));
    }
    caches
}

/// Backpropagation through time over a forward sequence.
///
/// `dh_out[t]` is the upstream gradient on the hidden output of step `t`.
/// Gradient does not cross a reset and the initial state is treated as
/// detached. Accumulates into `grad_params`; returns per-step input gradients.
pub fn lstm_bptt(
    cell: &LstmCell,
    params: &[f64],
    caches: &[LstmCache],
    resets: &[bool],
    dh_out: &[Vec<f64>],
    grad_params: &mut [f64],
) -> Vec<Vec<f64>> {
    let hd = cell.hidden;
    let mut dxs = vec![Vec::new(); caches.len()];
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    for t in (0..caches.len()).rev() {
        let dh: Vec<f64> = dh_out[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        let (dx, dh_prev, dc_prev) =
            cell.backward_step(params, &caches[t], &dh, &dc_next, grad_params);
        dxs[t] = dx;
        if resets.get(t).copied().unwrap_or(false) {
            dh_next = vec![0.0; hd];
            dc_next = vec![0.0; hd];
        } else {
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
    }
    dxs
}
