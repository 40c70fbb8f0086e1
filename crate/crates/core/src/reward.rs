//! Training rewards derived from ensemble disagreement `u`.
//!
//! - `Cmz`: continuous mean-zero reward `r = -α(u - ū)` with `ū` an
//!   exponential average of past disagreement, reset at episode start.
//! - `Dril`: `+1` when `u` is at or below a calibrated threshold, `-1` otherwise.
//! - `Penalty`: `r = -αu`, never positive.
//! - `TrueEnv` and `Zero`: pass-through of the environment reward, and nothing.

use serde::{Deserialize, Serialize};

use crate::envs::{DemoSet, EnvStep};
use crate::imitation::Ensemble;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShaperMode {
    Cmz,
    Dril,
    Penalty,
    TrueEnv,
    Zero,
}

impl ShaperMode {
    /// Whether the mode consults the ensemble at all.
    pub fn uses_disagreement(self) -> bool {
        matches!(self, ShaperMode::Cmz | ShaperMode::Dril | ShaperMode::Penalty)
    }

    pub fn name(self) -> &'static str {
        match self {
            ShaperMode::Cmz => "cmz",
            ShaperMode::Dril => "dril",
            ShaperMode::Penalty => "penalty",
            ShaperMode::TrueEnv => "true_env",
            ShaperMode::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShaperConfig {
    pub mode: ShaperMode,
    pub alpha: f64,
    pub gamma: f64,
    /// Expert-state quantile used to calibrate the DRIL threshold.
    pub dril_quantile: f64,
    /// Reset `ū` at every episode start (otherwise only once per run).
    pub reset_per_episode: bool,
}

impl Default for ShaperConfig {
    fn default() -> Self {
        Self {
            mode: ShaperMode::Cmz,
            alpha: 10.0,
            gamma: 0.99,
            dril_quantile: 0.98,
            reset_per_episode: true,
        }
    }
}

impl ShaperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.dril_quantile > 0.0 && self.dril_quantile <= 1.0) {
            return Err(Error::config(format!(
                "dril_quantile must lie in (0, 1], got {}",
                self.dril_quantile
            )));
        }
        Ok(())
    }
}

/// Per-environment shaping state.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardShaper {
    mode: ShaperMode,
    alpha: f64,
    gamma: f64,
    u_bar: f64,
    dril_threshold: Option<f64>,
    reset_per_episode: bool,
}

impl RewardShaper {
    pub fn new(config: &ShaperConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            mode: config.mode,
            alpha: config.alpha,
            gamma: config.gamma,
            u_bar: 0.0,
            dril_threshold: None,
            reset_per_episode: config.reset_per_episode,
        })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.dril_threshold = Some(threshold);
        self
    }

    pub fn mode(&self) -> ShaperMode {
        self.mode
    }

    pub fn u_bar(&self) -> f64 {
        self.u_bar
    }

    pub fn dril_threshold(&self) -> Option<f64> {
        self.dril_threshold
    }

    /// Call at every episode start.
    pub fn reset_episode(&mut self) {
        if self.reset_per_episode {
            self.u_bar = 0.0;
        }
    }

    fn check_u(u: f64) -> Result<()> {
        if !(u >= 0.0) || !u.is_finite() {
            return Err(Error::invalid(format!("disagreement must be finite and >= 0, got {u}")));
        }
        Ok(())
    }

    /// Reward with the current `ū`, then `ū ← γū + (1-γ)u`.
    pub fn cmz_reward(&mut self, u: f64) -> Result<f64> {
        if self.mode != ShaperMode::Cmz {
            return Err(Error::Contract(format!("cmz_reward called in {:?} mode", self.mode)));
        }
        Self::check_u(u)?;
        let r = -self.alpha * (u - self.u_bar);
        self.u_bar = self.gamma * self.u_bar + (1.0 - self.gamma) * u;
        Ok(r)
    }

    pub fn dril_reward(&self, u: f64) -> Result<f64> {
        let threshold = self
            .dril_threshold
            .ok_or_else(|| Error::config("DRIL reward needs a calibrated threshold"))?;
        Self::check_u(u)?;
        Ok(if u <= threshold { 1.0 } else { -1.0 })
    }

    pub fn penalty_reward(&self, u: f64) -> Result<f64> {
        Self::check_u(u)?;
        Ok(-self.alpha * u)
    }

    /// Training reward for one transition; `u` is ignored by the pass-through modes.
    pub fn shape(&mut self, env_step: &EnvStep, u: f64) -> Result<f64> {
        match self.mode {
            ShaperMode::Cmz => self.cmz_reward(u),
            ShaperMode::Dril => self.dril_reward(u),
            ShaperMode::Penalty => self.penalty_reward(u),
            ShaperMode::TrueEnv => Ok(env_step.reward),
            ShaperMode::Zero => Ok(0.0),
        }
    }
}

/// `q`-quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("quantile of an empty set"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile level {q} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// DRIL threshold: `q`-quantile of the disagreement over every expert observation.
pub fn calibrate_dril_threshold(ensemble: &Ensemble, demos: &DemoSet, q: f64) -> Result<f64> {
    if demos.is_empty() {
        return Err(Error::invalid("demo set is empty"));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1], got {q}")));
    }
    let us = demos
        .observations()
        .map(|o| ensemble.std(o))
        .collect::<Result<Vec<_>>>()?;
    quantile(&us, q)
}
