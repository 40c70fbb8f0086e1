use crate::nn::{Adam, AdamConfig, Mlp, Parameters, Tensor, Trace, DEFAULT_HIDDEN};
use crate::seed;

/// State-value network. The MLP predicts returns in normalized units;
/// [`ValueNet::value`] maps back with a running mean/std of the targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    net: Mlp,
    target_mean: f64,
    target_std: f64,
    initialized: bool,
}

impl ValueNet {
    pub fn new(obs_dim: usize, seed: u64) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(&DEFAULT_HIDDEN);
        sizes.push(1);
        Self {
            net: Mlp::new(&sizes, 1.0, &mut seed::rng(seed)),
            target_mean: 0.0,
            target_std: 1.0,
            initialized: false,
        }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.target_mean + self.target_std * self.net.forward(obs)[0]
    }

    pub fn target_stats(&self) -> (f64, f64) {
        (self.target_mean, self.target_std)
    }

    /// Move the normalization statistics toward the batch's, rescaling the
    /// output layer so every prediction is unchanged.
    pub(crate) fn update_target_stats(&mut self, returns: &[f64], rate: f64) {
        if returns.is_empty() {
            return;
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let second = returns.iter().map(|r| r * r).sum::<f64>() / n;
        let old_second = self.target_std * self.target_std + self.target_mean * self.target_mean;
        let (new_mean, new_second) = if self.initialized {
            (
                (1.0 - rate) * self.target_mean + rate * mean,
                (1.0 - rate) * old_second + rate * second,
            )
        } else {
            (mean, second)
        };
        self.initialized = true;
        let new_std = (new_second - new_mean * new_mean).max(0.0).sqrt().max(1e-4);
        let (old_mean, old_std) = (self.target_mean, self.target_std);
        let head = self
            .net
            .layers_mut()
            .last_mut()
            .expect("value net has layers");
        for w in head.weight.values_mut() {
            *w *= old_std / new_std;
        }
        for b in head.bias.values_mut() {
            *b = (old_std * *b + old_mean - new_mean) / new_std;
        }
        self.target_mean = new_mean;
        self.target_std = new_std;
    }

    pub(crate) fn optimizer(&self, lr: f64) -> Adam {
        Adam::new(AdamConfig::with_lr(lr), &self.net.parameters())
    }

    /// `0.5·(V(obs) − target)²` in normalized units, gradient scaled by `scale`.
    pub(crate) fn mse_backward(
        &mut self,
        obs: &[f64],
        target: f64,
        scale: f64,
        trace: &mut Trace,
    ) -> f64 {
        let t = (target - self.target_mean) / self.target_std;
        let pred = self.net.forward_traced(obs, trace)[0];
        let err = pred - t;
        self.net.backward(trace, &[err * scale]);
        0.5 * err * err
    }
}

impl Parameters for ValueNet {
    fn parameters(&self) -> Vec<&Tensor> {
        self.net.parameters()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.net.parameters_mut()
    }
}
