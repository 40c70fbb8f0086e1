use rand::Rng;
use rand_distr::StandardNormal;

use super::mlp::{Mlp, Trace};
use super::tensor::{Parameters, Tensor};
use crate::{seed, Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

/// 0.5·ln(2π)
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Diagonal Gaussian policy: tanh MLP for the mean, state-independent log std.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    net: Mlp,
    log_std: Tensor,
    obs_dim: usize,
    act_dim: usize,
}

impl GaussianPolicy {
    /// Default architecture: two hidden layers of 64 units, head gain 0.01, log std 0.
    pub fn new(obs_dim: usize, act_dim: usize, seed: u64) -> Self {
        Self::with_hidden(obs_dim, act_dim, &DEFAULT_HIDDEN, seed)
    }

    pub fn with_hidden(obs_dim: usize, act_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(obs_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(act_dim);
        let mut rng = seed::rng(seed);
        Self {
            net: Mlp::new(&sizes, 0.01, &mut rng),
            log_std: Tensor::zeros(&[act_dim]),
            obs_dim,
            act_dim,
        }
    }

    pub fn from_parts(net: Mlp, log_std: Tensor) -> Result<Self> {
        let act_dim = net.out_dim();
        if log_std.shape() != [act_dim] {
            return Err(Error::invalid(format!(
                "log_std shape {:?} does not match action dim {act_dim}",
                log_std.shape()
            )));
        }
        Ok(Self {
            obs_dim: net.in_dim(),
            act_dim,
            net,
            log_std,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn log_std(&self) -> &[f64] {
        self.log_std.values()
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        self.log_std.values_mut()
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.values().iter().map(|l| l.exp()).collect()
    }

    /// Project log std back into `[LOG_STD_MIN, LOG_STD_MAX]`; called after optimizer steps.
    pub fn clamp_log_std(&mut self) {
        for l in self.log_std.values_mut() {
            *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    fn check_obs(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.obs_dim {
            return Err(Error::invalid(format!(
                "observation has length {}, policy expects {}",
                obs.len(),
                self.obs_dim
            )));
        }
        Ok(())
    }

    fn check_action(&self, action: &[f64]) -> Result<()> {
        if action.len() != self.act_dim {
            return Err(Error::invalid(format!(
                "action has length {}, policy expects {}",
                action.len(),
                self.act_dim
            )));
        }
        Ok(())
    }

    /// Action mean for one observation.
    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.check_obs(obs)?;
        Ok(self.net.forward(obs))
    }

    pub(crate) fn mean_unchecked(&self, obs: &[f64]) -> Vec<f64> {
        self.net.forward(obs)
    }

    fn nll_from_mean(&self, mean: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(action)
            .zip(self.log_std.values())
            .map(|((m, a), ls)| {
                let z = (a - m) / ls.exp();
                ls + HALF_LN_2PI + 0.5 * z * z
            })
            .sum()
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        self.check_obs(obs)?;
        self.check_action(action)?;
        Ok(-self.nll_from_mean(&self.net.forward(obs), action))
    }

    /// Negative log likelihood of `action`; accumulates its gradient into every parameter.
    pub fn gaussian_nll(&mut self, obs: &[f64], action: &[f64]) -> Result<f64> {
        self.check_obs(obs)?;
        self.check_action(action)?;
        let mut trace = Trace::default();
        Ok(self.nll_backward(obs, action, 1.0, &mut trace))
    }

    /// NLL at `(obs, action)` with `scale·∂nll/∂θ` added to the gradients.
    /// Dimensions are assumed checked by the caller.
    pub(crate) fn nll_backward(
        &mut self,
        obs: &[f64],
        action: &[f64],
        scale: f64,
        trace: &mut Trace,
    ) -> f64 {
        let loss = self.traced_nll(obs, action, trace);
        self.backprop_nll(action, scale, trace);
        loss
    }

    /// Forward half of [`Self::nll_backward`]; the mean stays in `trace`.
    pub(crate) fn traced_nll(&self, obs: &[f64], action: &[f64], trace: &mut Trace) -> f64 {
        let mean = self.net.forward_traced(obs, trace);
        self.nll_from_mean(mean, action)
    }

    /// Backward half of [`Self::nll_backward`] for the input last traced.
    pub(crate) fn backprop_nll(&mut self, action: &[f64], scale: f64, trace: &mut Trace) {
        if scale == 0.0 {
            return;
        }
        let mean = trace.output();
        let mut dmean = Vec::with_capacity(self.act_dim);
        for d in 0..self.act_dim {
            let ls = self.log_std.values()[d];
            let inv_var = (-2.0 * ls).exp();
            let diff = action[d] - mean[d];
            dmean.push(-diff * inv_var * scale);
            self.log_std.grad_mut()[d] += (1.0 - diff * diff * inv_var) * scale;
        }
        self.net.backward(trace, &dmean);
    }

    /// Differential entropy of the action distribution.
    pub fn entropy(&self) -> f64 {
        self.log_std
            .values()
            .iter()
            .map(|ls| ls + HALF_LN_2PI + 0.5)
            .sum()
    }

    /// Add `scale·∂H/∂θ` to the gradients (only log std contributes).
    pub(crate) fn entropy_backward(&mut self, scale: f64) {
        for g in self.log_std.grad_mut() {
            *g += scale;
        }
    }

    /// Draw `a = μ + σ⊙z`, `z ~ N(0, I)`, returning the action and its log probability.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        rng: &mut R,
    ) -> Result<(Vec<f64>, f64)> {
        self.check_obs(obs)?;
        let mean = self.net.forward(obs);
        let action: Vec<f64> = mean
            .iter()
            .zip(self.log_std.values())
            .map(|(m, ls)| {
                let z: f64 = rng.sample(StandardNormal);
                m + ls.exp() * z
            })
            .collect();
        let log_prob = -self.nll_from_mean(&mean, &action);
        Ok((action, log_prob))
    }
}

impl Parameters for GaussianPolicy {
    fn parameters(&self) -> Vec<&Tensor> {
        let mut p = self.net.parameters();
        p.push(&self.log_std);
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.net.parameters_mut();
        p.push(&mut self.log_std);
        p
    }
}
