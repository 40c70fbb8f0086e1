use rand::Rng;

use super::tensor::{Parameters, Tensor};

/// Fully connected layer, `weight` stored as `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Scaled uniform init: entries ~ U(-g·√(3/fan_in), g·√(3/fan_in)), zero bias.
    pub fn new<R: Rng>(fan_in: usize, fan_out: usize, gain: f64, rng: &mut R) -> Self {
        let bound = gain * (3.0 / fan_in as f64).sqrt();
        let mut weight = Tensor::zeros(&[fan_out, fan_in]);
        for w in weight.values_mut() {
            *w = rng.gen_range(-bound..=bound);
        }
        Self {
            weight,
            bias: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[0]
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        let n_in = self.fan_in();
        out.clear();
        let w = self.weight.values();
        for (row, b) in w.chunks_exact(n_in).zip(self.bias.values()) {
            let mut acc = *b;
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }
}

/// Activations recorded by a forward pass, reused across calls.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Tanh MLP with a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`. Hidden layers use gain 1, the head `output_gain`.
    pub fn new<R: Rng>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let gain = if i == last { output_gain } else { 1.0 };
                Linear::new(w[0], w[1], gain, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Linear>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut trace = Trace::default();
        self.forward_traced(x, &mut trace);
        trace.acts.pop().unwrap_or_default()
    }

    /// Forward pass that keeps every activation for [`Mlp::backward`].
    pub fn forward_traced<'t>(&self, x: &[f64], trace: &'t mut Trace) -> &'t [f64] {
        let n = self.layers.len();
        trace.acts.resize_with(n + 1, Vec::new);
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(x);
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = trace.acts.split_at_mut(l + 1);
            let out = &mut rest[0];
            layer.apply(&done[l], out);
            if l + 1 < n {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        &trace.acts[n]
    }

    /// Accumulate `∂L/∂θ` given `dout = ∂L/∂output` for the traced input.
    pub fn backward(&mut self, trace: &mut Trace, dout: &[f64]) {
        let Trace {
            acts,
            delta,
            delta_prev,
        } = trace;
        delta.clear();
        delta.extend_from_slice(dout);
        for l in (0..self.layers.len()).rev() {
            let input = &acts[l];
            let layer = &mut self.layers[l];
            let n_in = input.len();
            {
                let gw = layer.weight.grad_mut();
                for (row, d) in gw.chunks_exact_mut(n_in).zip(delta.iter()) {
                    if *d == 0.0 {
                        continue;
                    }
                    for (g, x) in row.iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            for (g, d) in layer.bias.grad_mut().iter_mut().zip(delta.iter()) {
                *g += d;
            }
            if l == 0 {
                break;
            }
            delta_prev.clear();
            delta_prev.resize(n_in, 0.0);
            let w = layer.weight.values();
            for (row, d) in w.chunks_exact(n_in).zip(delta.iter()) {
                for (dp, wi) in delta_prev.iter_mut().zip(row) {
                    *dp += d * wi;
                }
            }
            // input is the tanh output of the previous layer
            for (dp, a) in delta_prev.iter_mut().zip(input) {
                *dp *= 1.0 - a * a;
            }
            std::mem::swap(delta, delta_prev);
        }
    }
}

impl Parameters for Mlp {
    fn parameters(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }
}
