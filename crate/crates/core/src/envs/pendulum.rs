//! Torque-limited pendulum swing-up. `θ = 0` is upright.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{clip_unit, wrap_angle, Env, EnvStep};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumConfig {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    /// Torque applied for an action of ±1.
    pub max_torque: f64,
    pub max_speed: f64,
    pub dt: f64,
    pub horizon: usize,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 1.0,
            gravity: 10.0,
            max_torque: 5.0,
            max_speed: 8.0,
            dt: 0.05,
            horizon: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PendulumWorld {
    config: PendulumConfig,
    theta: f64,
    theta_dot: f64,
    steps: usize,
    done: bool,
}

impl PendulumWorld {
    pub fn new(config: PendulumConfig) -> Self {
        Self {
            config,
            theta: PI,
            theta_dot: 0.0,
            steps: 0,
            done: true,
        }
    }

    pub fn config(&self) -> &PendulumConfig {
        &self.config
    }

    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = wrap_angle(theta);
        self.theta_dot = theta_dot.clamp(-self.config.max_speed, self.config.max_speed);
        self.steps = 0;
        self.done = false;
    }

    /// Mechanical energy relative to resting upright, per unit `m·l²`.
    fn energy(&self) -> f64 {
        let c = &self.config;
        0.5 * self.theta_dot * self.theta_dot + c.gravity / c.length * (self.theta.cos() - 1.0)
    }

    fn expert(&self) -> f64 {
        let c = &self.config;
        let inertia = c.mass * c.length * c.length;
        if self.theta.abs() < 0.6 {
            // PD catch at the top, gravity compensated
            let torque = inertia * (c.gravity / c.length * self.theta.sin())
                + inertia * (-25.0 * self.theta - 6.0 * self.theta_dot);
            return (torque / c.max_torque).clamp(-1.0, 1.0);
        }
        if self.energy() < 0.0 {
            // dE/dt = θ̇·τ / (m l²): push along the velocity
            if self.theta_dot >= 0.0 {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    }
}

impl Env for PendulumWorld {
    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn trace_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let mut rng = seed::rng(seed);
        let theta = rng.gen_range(-PI..PI);
        let theta_dot = rng.gen_range(-1.0..1.0);
        self.set_state(theta, theta_dot);
        Ok(self.observation())
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        if self.done {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        if action.len() != 1 {
            return Err(Error::invalid(format!("expected 1 action, got {}", action.len())));
        }
        let c = &self.config;
        let torque = clip_unit(action)[0] * c.max_torque;
        let reward = -(self.theta * self.theta
            + 0.1 * self.theta_dot * self.theta_dot
            + 0.001 * torque * torque);
        let accel = c.gravity / c.length * self.theta.sin() + torque / (c.mass * c.length * c.length);
        // semi-implicit Euler
        self.theta_dot = (self.theta_dot + accel * c.dt).clamp(-c.max_speed, c.max_speed);
        self.theta = wrap_angle(self.theta + self.theta_dot * c.dt);
        self.steps += 1;
        self.done = self.steps >= c.horizon;
        Ok(EnvStep {
            observation: self.observation(),
            reward,
            done: self.done,
            step: self.steps,
        })
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn expert_action(&self) -> Vec<f64> {
        vec![self.expert()]
    }

    fn trace_point(&self) -> Vec<f64> {
        vec![self.theta, self.theta_dot]
    }
}
