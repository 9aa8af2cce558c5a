use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

/// Affine map plus activation. Parameters are laid out as a row-major
/// `output x input` weight matrix followed by the `output` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

#[derive(Clone, Debug, Default)]
pub struct DenseCache {
    pub input: Vec<f64>,
    /// Post-activation output.
    pub output: Vec<f64>,
}

impl DenseLayer {
    pub fn new(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            input,
            output,
            activation,
        }
    }

    pub fn num_params(&self) -> usize {
        self.output * self.input + self.output
    }

    pub fn split<'a>(&self, params: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        params[..self.num_params()].split_at(self.output * self.input)
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<DenseCache> {
        if x.len() != self.input {
            return Err(Error::Usage(format!(
                "dense layer expects input of length {}, got {}",
                self.input,
                x.len()
            )));
        }
        if params.len() < self.num_params() {
            return Err(Error::Usage(format!(
                "dense layer needs {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let (w, b) = self.split(params);
        let mut out = b.to_vec();
        for (o, row) in out.iter_mut().zip(w.chunks_exact(self.input)) {
            *o += super::dot(row, x);
        }
        if self.activation == Activation::Tanh {
            out.iter_mut().for_each(|v| *v = v.tanh());
        }
        Ok(DenseCache {
            input: x.to_vec(),
            output: out,
        })
    }

    /// Accumulates parameter gradients into `grad_params` and returns the
    /// gradient with respect to the layer input.
    pub fn backward(
        &self,
        params: &[f64],
        cache: &DenseCache,
        grad_out: &[f64],
        grad_params: &mut [f64],
    ) -> Vec<f64> {
        let dz: Vec<f64> = match self.activation {
            Activation::Tanh => grad_out
                .iter()
                .zip(&cache.output)
                .map(|(g, y)| g * (1.0 - y * y))
                .collect(),
            Activation::Identity => grad_out.to_vec(),
        };
        let (w, _) = self.split(params);
        let (gw, gb) = grad_params[..self.num_params()].split_at_mut(self.output * self.input);
        let mut dx = vec![0.0; self.input];
        for (o, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &w[o * self.input..(o + 1) * self.input];
            let grow = &mut gw[o * self.input..(o + 1) * self.input];
            for ((g, x), (dxi, w)) in grow
                .iter_mut()
                .zip(&cache.input)
                .zip(dx.iter_mut().zip(row))
            {
                *g += d * x;
                *dxi += w * d;
            }
            gb[o] += d;
        }
        dx
    }
}

/// A stack of dense layers sharing one contiguous parameter slice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

#[derive(Clone, Debug, Default)]
pub struct MlpCache {
    pub layers: Vec<DenseCache>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        &self.layers.last().expect("non-empty mlp").output
    }
}

impl Mlp {
    /// Builds `input -> hidden[0] -> ... -> hidden[n-1]`, all with the same activation.
    pub fn new(input: usize, hidden: &[usize], activation: Activation) -> Self {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut prev = input;
        for &h in hidden {
            layers.push(DenseLayer::new(prev, h, activation));
            prev = h;
        }
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.input)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<MlpCache> {
        if params.len() < self.num_params() {
            return Err(Error::Usage(format!(
                "mlp needs {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        let mut input = x.to_vec();
        for layer in &self.layers {
            let cache = layer.forward(&params[offset..], &input)?;
            offset += layer.num_params();
            input = cache.output.clone();
            caches.push(cache);
        }
        if caches.is_empty() {
            caches.push(DenseCache {
                input: x.to_vec(),
                output: x.to_vec(),
            });
        }
        Ok(MlpCache { layers: caches })
    }

    pub fn backward(
        &self,
        params: &[f64],
        cache: &MlpCache,
        grad_out: &[f64],
        grad_params: &mut [f64],
    ) -> Vec<f64> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for layer in &self.layers {
            offsets.push(offset);
            offset += layer.num_params();
        }
        let mut grad = grad_out.to_vec();
        for ((layer, c), &off) in self.layers.iter().zip(&cache.layers).zip(&offsets).rev() {
            grad = layer.backward(&params[off..], c, &grad, &mut grad_params[off..]);
        }
        grad
    }
}
