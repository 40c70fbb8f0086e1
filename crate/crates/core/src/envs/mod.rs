//! Environments with scripted experts.
//!
//! Both worlds take actions in `[-1, 1]^act_dim` (clipped before the
//! dynamics), expose a true reward used only for evaluation and the
//! true-reward ablation, and terminate within a fixed horizon.

mod demos;
mod pendulum;
mod waypoint;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::GaussianPolicy;
use crate::Result;

pub use demos::{collect_demos, episode_seeds, record_episode, DemoEpisode, DemoSet};
pub use pendulum::{PendulumConfig, PendulumWorld};
pub use waypoint::{ray_circle_distance, Obstacle, WaypointConfig, WaypointWorld};

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observation: Vec<f64>,
    /// True environment reward.
    pub reward: f64,
    pub done: bool,
    /// Number of steps taken in the episode so far, including this one.
    pub step: usize,
}

pub trait Env: Send {
    fn name(&self) -> &'static str;
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    /// Dimension of the points returned by [`Env::trace_point`].
    fn trace_dim(&self) -> usize;
    fn horizon(&self) -> usize;

    /// Start a new episode; the initial state is a pure function of `seed`.
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;

    /// Advance one step. Fails with a contract error once the episode is done.
    fn step(&mut self, action: &[f64]) -> Result<EnvStep>;

    fn observation(&self) -> Vec<f64>;
    fn is_done(&self) -> bool;

    /// Scripted expert's action in the current state, in `[-1, 1]^act_dim`.
    fn expert_action(&self) -> Vec<f64>;

    /// Point used for trajectory similarity: position for navigation,
    /// `(θ, θ̇)` for the pendulum.
    fn trace_point(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Waypoint,
    Pendulum,
}

impl EnvKind {
    pub fn make(self) -> Box<dyn Env> {
        match self {
            EnvKind::Waypoint => Box::new(WaypointWorld::new(WaypointConfig::default())),
            EnvKind::Pendulum => Box::new(PendulumWorld::new(PendulumConfig::default())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Waypoint => "waypoint",
            EnvKind::Pendulum => "pendulum",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "waypoint" => Ok(EnvKind::Waypoint),
            "pendulum" => Ok(EnvKind::Pendulum),
            other => Err(crate::Error::config(format!(
                "unknown environment {other:?} (expected waypoint or pendulum)"
            ))),
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Something that picks actions inside an environment.
pub trait Actor {
    fn act(&mut self, env: &dyn Env, obs: &[f64]) -> Vec<f64>;
}

/// The environment's scripted expert.
pub struct Expert;

impl Actor for Expert {
    fn act(&mut self, env: &dyn Env, _obs: &[f64]) -> Vec<f64> {
        env.expert_action()
    }
}

/// Policy mean, no sampling noise.
pub struct Deterministic<'a>(pub &'a GaussianPolicy);

impl Actor for Deterministic<'_> {
    fn act(&mut self, _env: &dyn Env, obs: &[f64]) -> Vec<f64> {
        self.0.mean_unchecked(obs)
    }
}

/// Sampled policy actions.
pub struct Stochastic<'a, R> {
    pub policy: &'a GaussianPolicy,
    pub rng: R,
}

impl<R: Rng> Actor for Stochastic<'_, R> {
    fn act(&mut self, _env: &dyn Env, obs: &[f64]) -> Vec<f64> {
        self.policy
            .sample_action(obs, &mut self.rng)
            .map(|(a, _)| a)
            .unwrap_or_else(|_| vec![0.0; self.policy.act_dim()])
    }
}

/// Uniform actions in `[-1, 1]^act_dim`.
pub struct UniformRandom<R>(pub R);

impl<R: Rng> Actor for UniformRandom<R> {
    fn act(&mut self, env: &dyn Env, _obs: &[f64]) -> Vec<f64> {
        (0..env.act_dim())
            .map(|_| self.0.gen_range(-1.0..=1.0))
            .collect()
    }
}

pub(crate) fn clip_unit(action: &[f64]) -> Vec<f64> {
    action.iter().map(|a| a.clamp(-1.0, 1.0)).collect()
}

/// Wrap an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}
