//! Fully connected network with hand-rolled reverse mode.
//!
//! Hidden layers use tanh, the output layer is linear. Forward returns a
//! cache of post-activation values; backward consumes it and produces exact
//! parameter gradients plus the input gradient.

use crate::error::{Error, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Row-major (out_dim x in_dim) weights.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl DenseLayer {
    fn new(in_dim: usize, out_dim: usize, rng: &mut RandomSource) -> Self {
        let scale = (1.0 / in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim).map(|_| rng.normal() * scale).collect();
        Self {
            weights,
            biases: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut z = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                z += w * x;
            }
            out.push(z);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<DenseLayer>,
}

/// Post-activation values of every layer plus the network input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub activations: Vec<Vec<f64>>,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Debug, Clone)]
pub struct NetGradient {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
}

impl NetGradient {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            d_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            d_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &NetGradient) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

impl DenseNet {
    /// Build a network with the given `[input, hidden..., output]` widths.
    pub fn new(dims: &[usize], rng: &mut RandomSource) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidConfig("network needs input and output widths".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("network widths must be positive".into()));
        }
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::new(w[0], w[1], rng))
            .collect();
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Forward pass; tanh on every layer except the last.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input length {} vs network input dim {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut cur = input.to_vec();
        let last = self.layers.len() - 1;
        let mut z = Vec::new();
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, &mut z);
            if idx != last {
                for v in z.iter_mut() {
                    *v = v.tanh();
                }
            }
            activations.push(z.clone());
            std::mem::swap(&mut cur, &mut z);
        }
        let cache = ForwardCache {
            input: input.to_vec(),
            activations,
        };
        Ok((cur, cache))
    }

    /// Exact reverse-mode gradient of `<cotangent, forward(input)>` with
    /// respect to the parameters, plus the gradient on the input.
    pub fn backward(&self, cache: &ForwardCache, cotangent: &[f64]) -> Result<(NetGradient, Vec<f64>)> {
        if cache.activations.len() != self.layers.len()
            || cache.input.len() != self.input_dim()
            || cache
                .activations
                .iter()
                .zip(&self.layers)
                .any(|(a, l)| a.len() != l.out_dim)
        {
            return Err(Error::InvalidCache("cache does not match network architecture".into()));
        }
        if cotangent.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "cotangent length {} vs output dim {}",
                cotangent.len(),
                self.output_dim()
            )));
        }
        let mut grad = NetGradient::zeros_like(self);
        let last = self.layers.len() - 1;
        // d_cur holds dL/dz of the current layer (post-linearity for the
        // output layer, post-tanh correction for the hidden ones)
        let mut d_cur = cotangent.to_vec();
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            if idx != last {
                // activations[idx] stores tanh(z); tanh' = 1 - tanh^2
                for (d, a) in d_cur.iter_mut().zip(&cache.activations[idx]) {
                    *d *= 1.0 - a * a;
                }
            }
            let layer_input: &[f64] = if idx == 0 {
                &cache.input
            } else {
                &cache.activations[idx - 1]
            };
            for o in 0..layer.out_dim {
                grad.d_biases[idx][o] += d_cur[o];
                let row = &mut grad.d_weights[idx][o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, x) in row.iter_mut().zip(layer_input) {
                    *g += d_cur[o] * x;
                }
            }
            let mut d_prev = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (d, w) in d_prev.iter_mut().zip(row) {
                    *d += d_cur[o] * w;
                }
            }
            d_cur = d_prev;
        }
        Ok((grad, d_cur))
    }

    /// Plain gradient-descent update: `theta <- theta - lr * grad`.
    pub fn sgd_step(&mut self, grad: &NetGradient, lr: f64) {
        for (layer, (dw, db)) in self
            .layers
            .iter_mut()
            .zip(grad.d_weights.iter().zip(&grad.d_biases))
        {
            for (w, g) in layer.weights.iter_mut().zip(dw) {
                *w -= lr * g;
            }
            for (b, g) in layer.biases.iter_mut().zip(db) {
                *b -= lr * g;
            }
        }
    }

    /// Flat parameter vector in layer order (weights then biases per layer).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    /// Overwrite parameters from a flat vector laid out as
    /// [`DenseNet::flat_params`].
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters vs expected {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
        Ok(())
    }
}
