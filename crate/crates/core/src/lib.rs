//! Disagreement-regularized imitation learning on desk-scale control tasks.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense tensors, tanh MLPs with hand-written backward passes, the
//!   diagonal Gaussian policy head and Adam.
//! - [`envs`]: the environment trait, a lidar waypoint-navigation world and a
//!   torque-limited pendulum, each with a scripted expert.
//! - [`imitation`]: behavioral cloning and the bootstrap policy ensemble.
//! - [`reward`]: reward shapers driven by ensemble disagreement.
//! - [`ppo`]: rollouts, GAE and the clipped-surrogate update.
//! - [`trainer`]: the pretrain / PPO + NLL interleaved training loop and the
//!   multi-trial condition suite.
//! - [`metrics`]: discrete Fréchet distance, action MSE and Gaussian smoothing.

mod codec;
pub mod envs;
pub mod error;
pub mod imitation;
pub mod metrics;
pub mod nn;
pub mod ppo;
pub mod reward;
pub mod seed;
pub mod summary;
pub mod trainer;

pub use error::{Error, Result};
