//! Proximal policy optimization: rollouts, GAE, the clipped surrogate and a
//! separately optimized value network.

mod gae;
mod rollout;
mod value;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nn::{Adam, AdamConfig, GaussianPolicy, Parameters, Tensor, Trace};
use crate::{seed, Error, Result};

pub use gae::{compute_gae, gae_from_values, normalize_advantages};
pub use rollout::{collect_rollouts, RolloutStats, Trajectory};
pub use value::ValueNet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub entropy_coef: f64,
    pub rollout_steps: usize,
    /// Global gradient-norm limit per network; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
    /// Learn values in running-normalized units (outputs are preserved when
    /// the statistics move).
    pub normalize_value_targets: bool,
    pub value_stats_rate: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs: 10,
            minibatch_size: 64,
            policy_lr: 3e-4,
            value_lr: 3e-4,
            entropy_coef: 0.0,
            rollout_steps: 2048,
            max_grad_norm: Some(0.5),
            normalize_value_targets: false,
            value_stats_rate: 0.1,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::config(format!(
                "gae_lambda must lie in [0, 1], got {}",
                self.gae_lambda
            )));
        }
        if !(self.clip_eps > 0.0) {
            return Err(Error::config(format!("clip_eps must be positive, got {}", self.clip_eps)));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.rollout_steps == 0 {
            return Err(Error::config("epochs, minibatch_size and rollout_steps must be >= 1"));
        }
        Ok(())
    }
}

/// Per-update diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    /// `E[(ρ − 1) − ln ρ]` over the batch after the update.
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
}

/// One sample of the clipped surrogate.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateSample<'a> {
    pub obs: &'a [f64],
    pub action: &'a [f64],
    pub old_log_prob: f64,
    pub advantage: f64,
}

/// `−mean(min(ρA, clip(ρ, 1−ε, 1+ε)A)) − c_e·H`. With `backward`, adds its
/// gradient to the policy's gradient buffers.
pub fn surrogate_loss(
    policy: &mut GaussianPolicy,
    samples: &[SurrogateSample],
    clip_eps: f64,
    entropy_coef: f64,
    backward: bool,
) -> Result<f64> {
    let mut trace = Trace::default();
    surrogate_with_trace(policy, samples, clip_eps, entropy_coef, backward, &mut trace)
}

fn surrogate_with_trace(
    policy: &mut GaussianPolicy,
    samples: &[SurrogateSample],
    clip_eps: f64,
    entropy_coef: f64,
    backward: bool,
    trace: &mut Trace,
) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let inv_n = 1.0 / samples.len() as f64;
    let mut loss = 0.0;
    for s in samples {
        let nll = policy.traced_nll(s.obs, s.action, trace);
        let ratio = (-nll - s.old_log_prob).exp();
        if !ratio.is_finite() {
            return Err(Error::NonFinite(format!(
                "probability ratio (log ratio {})",
                -nll - s.old_log_prob
            )));
        }
        let unclipped = ratio * s.advantage;
        let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * s.advantage;
        loss -= unclipped.min(clipped) * inv_n;
        if backward && unclipped <= clipped {
            // ∂(−ρA)/∂θ = ρA·∂nll/∂θ
            policy.backprop_nll(s.action, unclipped * inv_n, trace);
        }
    }
    loss -= entropy_coef * policy.entropy();
    if backward && entropy_coef != 0.0 {
        policy.entropy_backward(-entropy_coef);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("surrogate loss".into()));
    }
    Ok(loss)
}

fn clip_grad_norm(params: &mut [&mut Tensor], max_norm: Option<f64>) {
    let Some(max_norm) = max_norm else { return };
    let norm = params
        .iter()
        .flat_map(|p| p.grad().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for p in params.iter_mut() {
            p.grad_mut().iter_mut().for_each(|g| *g *= s);
        }
    }
}

/// Persistent PPO optimizer state for a policy/value pair.
#[derive(Debug, Clone)]
pub struct PpoLearner {
    pub config: PpoConfig,
    policy_opt: Adam,
    value_opt: Adam,
    updates: u64,
}

impl PpoLearner {
    pub fn new(config: PpoConfig, policy: &GaussianPolicy, value_net: &ValueNet) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            policy_opt: Adam::new(AdamConfig::with_lr(config.policy_lr), &policy.parameters()),
            value_opt: value_net.optimizer(config.value_lr),
            config,
            updates: 0,
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// One PPO update from a batch of trajectories; minibatch order comes from `seed`.
    pub fn update(
        &mut self,
        policy: &mut GaussianPolicy,
        value_net: &mut ValueNet,
        batch: &[Trajectory],
        seed: u64,
    ) -> Result<PpoDiagnostics> {
        let cfg = self.config.clone();
        let mut advantages = Vec::new();
        let mut returns = Vec::new();
        let mut index = Vec::new();
        for (k, traj) in batch.iter().enumerate() {
            traj.check()?;
            let (adv, ret) = compute_gae(traj, value_net, cfg.gamma, cfg.gae_lambda);
            advantages.extend(adv);
            returns.extend(ret);
            index.extend((0..traj.len()).map(|t| (k, t)));
        }
        if index.is_empty() {
            return Err(Error::invalid("empty PPO batch"));
        }
        if advantages.iter().chain(&returns).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("advantages or returns".into()));
        }
        normalize_advantages(&mut advantages);
        if cfg.normalize_value_targets {
            value_net.update_target_stats(&returns, cfg.value_stats_rate);
        }

        let samples: Vec<SurrogateSample> = index
            .iter()
            .zip(&advantages)
            .map(|(&(k, t), &advantage)| SurrogateSample {
                obs: batch[k].obs(t),
                action: batch[k].action(t),
                old_log_prob: batch[k].log_probs[t],
                advantage,
            })
            .collect();

        let mut rng = seed::rng(seed);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut trace = Trace::default();
        let mut mb = Vec::with_capacity(cfg.minibatch_size);
        let (mut policy_loss, mut value_loss, mut n_mb) = (0.0, 0.0, 0usize);
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.minibatch_size) {
                mb.clear();
                mb.extend(chunk.iter().map(|&i| samples[i]));
                policy.zero_grad();
                policy_loss += surrogate_with_trace(
                    policy,
                    &mb,
                    cfg.clip_eps,
                    cfg.entropy_coef,
                    true,
                    &mut trace,
                )?;
                let mut params = policy.parameters_mut();
                clip_grad_norm(&mut params, cfg.max_grad_norm);
                self.policy_opt.step(&mut params);
                policy.clamp_log_std();

                value_net.zero_grad();
                let scale = 1.0 / chunk.len() as f64;
                let mut vl = 0.0;
                for &i in chunk {
                    vl += value_net.mse_backward(samples[i].obs, returns[i], scale, &mut trace);
                }
                value_loss += vl * scale;
                let mut vparams = value_net.parameters_mut();
                clip_grad_norm(&mut vparams, cfg.max_grad_norm);
                self.value_opt.step(&mut vparams);
                n_mb += 1;
            }
        }
        policy.zero_grad();
        value_net.zero_grad();
        if !policy.all_finite() || !value_net.all_finite() {
            return Err(Error::NonFinite("parameters after PPO update".into()));
        }

        let (mut kl, mut clipped) = (0.0, 0usize);
        for s in &samples {
            let log_ratio = policy.log_prob(s.obs, s.action)? - s.old_log_prob;
            let ratio = log_ratio.exp();
            kl += (ratio - 1.0) - log_ratio;
            if (ratio - 1.0).abs() > cfg.clip_eps {
                clipped += 1;
            }
        }
        let n = samples.len() as f64;
        let diag = PpoDiagnostics {
            policy_loss: policy_loss / n_mb as f64,
            value_loss: value_loss / n_mb as f64,
            approx_kl: kl / n,
            clip_fraction: clipped as f64 / n,
            entropy: policy.entropy(),
        };
        if [diag.policy_loss, diag.value_loss, diag.approx_kl].iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("PPO diagnostics {diag:?}")));
        }
        self.updates += 1;
        Ok(diag)
    }
}

/// Single PPO update with fresh optimizer state.
pub fn ppo_update(
    policy: &mut GaussianPolicy,
    value_net: &mut ValueNet,
    batch: &[Trajectory],
    config: &PpoConfig,
    seed: u64,
) -> Result<PpoDiagnostics> {
    PpoLearner::new(config.clone(), policy, value_net)?.update(policy, value_net, batch, seed)
}
