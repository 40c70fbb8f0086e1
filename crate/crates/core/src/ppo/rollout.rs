use super::ValueNet;
use crate::envs::Env;
use crate::imitation::Ensemble;
use crate::nn::GaussianPolicy;
use crate::reward::RewardShaper;
use crate::{seed, Error, Result};

/// One contiguous piece of an episode collected with a fixed policy.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub obs_dim: usize,
    pub act_dim: usize,
    /// Row-major, one observation per step.
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub shaped_rewards: Vec<f64>,
    pub true_rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Ensemble disagreement at each step's observation (0 without an ensemble).
    pub disagreement: Vec<f64>,
    /// Observation after the last step, used to bootstrap unfinished pieces.
    pub final_obs: Vec<f64>,
}

impl Trajectory {
    fn new(obs_dim: usize, act_dim: usize) -> Self {
        Self {
            obs_dim,
            act_dim,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.shaped_rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shaped_rewards.is_empty()
    }

    pub fn obs(&self, t: usize) -> &[f64] {
        &self.observations[t * self.obs_dim..(t + 1) * self.obs_dim]
    }

    pub fn action(&self, t: usize) -> &[f64] {
        &self.actions[t * self.act_dim..(t + 1) * self.act_dim]
    }

    pub fn ends_episode(&self) -> bool {
        self.dones.last().copied().unwrap_or(false)
    }

    /// Arrays agree in length, log probs are finite and only the last step may be done.
    pub fn check(&self) -> Result<()> {
        let n = self.len();
        let lengths_ok = self.observations.len() == n * self.obs_dim
            && self.actions.len() == n * self.act_dim
            && [
                self.true_rewards.len(),
                self.log_probs.len(),
                self.values.len(),
                self.dones.len(),
                self.disagreement.len(),
            ]
            .iter()
            .all(|&l| l == n);
        if !lengths_ok {
            return Err(Error::Contract("trajectory arrays differ in length".into()));
        }
        if self.log_probs.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite("trajectory log probability".into()));
        }
        if self.dones.iter().rev().skip(1).any(|&d| d) {
            return Err(Error::Contract("done flag before the last step".into()));
        }
        Ok(())
    }
}

/// Summary of a batch of trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RolloutStats {
    pub steps: usize,
    pub mean_shaped_reward: f64,
    pub mean_true_reward: f64,
    pub mean_disagreement: f64,
    /// Mean true return of the episodes that finished inside the batch
    /// (every collection starts from a fresh reset, so these are whole episodes).
    pub mean_episode_return: Option<f64>,
    pub completed_episodes: usize,
}

impl RolloutStats {
    pub fn from_batch(batch: &[Trajectory]) -> Self {
        let steps: usize = batch.iter().map(Trajectory::len).sum();
        let sum = |f: fn(&Trajectory) -> &Vec<f64>| -> f64 {
            batch.iter().flat_map(|t| f(t).iter()).sum::<f64>()
        };
        let per_step = |x: f64| if steps == 0 { 0.0 } else { x / steps as f64 };
        let finished: Vec<f64> = batch
            .iter()
            .filter(|t| t.ends_episode())
            .map(|t| t.true_rewards.iter().sum())
            .collect();
        Self {
            steps,
            mean_shaped_reward: per_step(sum(|t| &t.shaped_rewards)),
            mean_true_reward: per_step(sum(|t| &t.true_rewards)),
            mean_disagreement: per_step(sum(|t| &t.disagreement)),
            completed_episodes: finished.len(),
            mean_episode_return: (!finished.is_empty())
                .then(|| finished.iter().sum::<f64>() / finished.len() as f64),
        }
    }
}

/// Step a fresh environment for exactly `n_steps` transitions with sampled
/// actions, auto-resetting finished episodes on seeds derived from `seed`.
/// Each step's training reward is `shaper.shape(step, u)` with `u` the
/// ensemble disagreement at the observation the action was taken in. The
/// shaper's running state carries over between calls unless it resets per episode.
pub fn collect_rollouts(
    env_factory: &dyn Fn() -> Box<dyn Env>,
    policy: &GaussianPolicy,
    value_net: &ValueNet,
    shaper: &mut RewardShaper,
    ensemble: Option<&Ensemble>,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if shaper.mode().uses_disagreement() && ensemble.is_none() {
        return Err(Error::config(format!(
            "{:?} shaping needs an ensemble",
            shaper.mode()
        )));
    }
    let mut env = env_factory();
    let (obs_dim, act_dim) = (env.obs_dim(), env.act_dim());
    if policy.obs_dim() != obs_dim || policy.act_dim() != act_dim {
        return Err(Error::invalid("policy dimensions do not match the environment"));
    }
    let mut rng = seed::rng(seed::child(seed, u64::MAX));
    let mut batch = Vec::new();
    let mut episode = 0u64;
    let mut obs = env.reset(seed::child(seed, episode))?;
    shaper.reset_episode();
    let mut traj = Trajectory::new(obs_dim, act_dim);

    for i in 0..n_steps {
        let (action, log_prob) = policy.sample_action(&obs, &mut rng)?;
        let value = value_net.value(&obs);
        let u = match ensemble {
            Some(e) => e.std(&obs)?,
            None => 0.0,
        };
        let step = env.step(&action)?;
        let shaped = shaper.shape(&step, u)?;

        traj.observations.extend_from_slice(&obs);
        traj.actions.extend_from_slice(&action);
        traj.shaped_rewards.push(shaped);
        traj.true_rewards.push(step.reward);
        traj.log_probs.push(log_prob);
        traj.values.push(value);
        traj.dones.push(step.done);
        traj.disagreement.push(u);

        if step.done {
            traj.final_obs = step.observation;
            batch.push(std::mem::replace(&mut traj, Trajectory::new(obs_dim, act_dim)));
            if i + 1 < n_steps {
                episode += 1;
                obs = env.reset(seed::child(seed, episode))?;
                shaper.reset_episode();
            }
        } else {
            obs = step.observation;
        }
    }
    if !traj.is_empty() {
        traj.final_obs = obs;
        batch.push(traj);
    }
    Ok(batch)
}
