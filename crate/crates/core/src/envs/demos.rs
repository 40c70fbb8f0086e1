//! Recorded episodes and the demo file format.
//!
//! File layout (little endian): `b"CMZD"`, `u32` version, env name
//! (length-prefixed UTF-8), `u64 obs_dim`, `u64 act_dim`, `u64 trace_dim`,
//! `u64` episode count, then per episode `u64 seed`, `u64 steps` followed by
//! the length-prefixed flat arrays `observations`, `actions`, `rewards`,
//! `trace`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Actor, Env};
use crate::codec::*;
use crate::{seed, Error, Result};

const MAGIC: &[u8; 4] = b"CMZD";
const VERSION: u32 = 1;

/// One recorded episode. `observations[i]` is the state `actions[i]` was
/// taken in; `trace` holds `steps + 1` points (initial state included).
#[derive(Debug, Clone, PartialEq)]
pub struct DemoEpisode {
    pub seed: u64,
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub trace: Vec<f64>,
}

impl DemoEpisode {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Expert observation–action pairs grouped by episode.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub env_name: String,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub trace_dim: usize,
    pub episodes: Vec<DemoEpisode>,
}

impl DemoSet {
    pub fn new(env_name: &str, obs_dim: usize, act_dim: usize, trace_dim: usize) -> Self {
        Self {
            env_name: env_name.to_string(),
            obs_dim,
            act_dim,
            trace_dim,
            episodes: Vec::new(),
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.episodes.iter().map(DemoEpisode::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_pairs() == 0
    }

    /// Every `(observation, action)` pair in episode order.
    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.episodes.iter().flat_map(move |ep| {
            ep.observations
                .chunks_exact(self.obs_dim)
                .zip(ep.actions.chunks_exact(self.act_dim))
        })
    }

    pub fn observations(&self) -> impl Iterator<Item = &[f64]> {
        self.pairs().map(|(o, _)| o)
    }

    pub fn episode_trace<'a>(&self, ep: &'a DemoEpisode) -> Vec<&'a [f64]> {
        ep.trace.chunks_exact(self.trace_dim).collect()
    }

    /// Subset made of the given episode indices (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> DemoSet {
        DemoSet {
            episodes: indices.iter().map(|&i| self.episodes[i].clone()).collect(),
            ..DemoSet::new(&self.env_name, self.obs_dim, self.act_dim, self.trace_dim)
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, ep) in self.episodes.iter().enumerate() {
            let n = ep.len();
            let bad = n == 0
                || ep.observations.len() != n * self.obs_dim
                || ep.actions.len() != n * self.act_dim
                || ep.trace.len() != (n + 1) * self.trace_dim;
            if bad {
                return Err(Error::invalid(format!("episode {i} has inconsistent array lengths")));
            }
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        put_u32(w, VERSION)?;
        put_str(w, &self.env_name)?;
        put_u64(w, self.obs_dim as u64)?;
        put_u64(w, self.act_dim as u64)?;
        put_u64(w, self.trace_dim as u64)?;
        put_u64(w, self.episodes.len() as u64)?;
        for ep in &self.episodes {
            put_u64(w, ep.seed)?;
            put_u64(w, ep.len() as u64)?;
            put_f64s(w, &ep.observations)?;
            put_f64s(w, &ep.actions)?;
            put_f64s(w, &ep.rewards)?;
            put_f64s(w, &ep.trace)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        expect_magic(r, MAGIC)?;
        let version = get_u32(r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported demo file version {version}")));
        }
        let env_name = get_str(r)?;
        let obs_dim = get_len(r)?;
        let act_dim = get_len(r)?;
        let trace_dim = get_len(r)?;
        let count = get_len(r)?;
        let mut set = DemoSet::new(&env_name, obs_dim, act_dim, trace_dim);
        for _ in 0..count {
            let seed = get_u64(r)?;
            let steps = get_len(r)?;
            let ep = DemoEpisode {
                seed,
                observations: get_f64s(r)?,
                actions: get_f64s(r)?,
                rewards: get_f64s(r)?,
                trace: get_f64s(r)?,
            };
            if ep.len() != steps {
                return Err(Error::Format("episode length prefix does not match data".into()));
            }
            set.episodes.push(ep);
        }
        set.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(set)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(&mut BufReader::new(File::open(path)?))
    }
}

/// Run `actor` for one full episode from `reset(seed)`.
pub fn record_episode(env: &mut dyn Env, actor: &mut dyn Actor, seed: u64) -> Result<DemoEpisode> {
    let mut obs = env.reset(seed)?;
    let mut ep = DemoEpisode {
        seed,
        observations: Vec::new(),
        actions: Vec::new(),
        rewards: Vec::new(),
        trace: env.trace_point(),
    };
    while !env.is_done() {
        let action = actor.act(&*env, &obs);
        let step = env.step(&action)?;
        ep.observations.extend_from_slice(&obs);
        ep.actions.extend_from_slice(&action);
        ep.rewards.push(step.reward);
        ep.trace.extend(env.trace_point());
        obs = step.observation;
    }
    Ok(ep)
}

/// Episode seeds used by [`collect_demos`] for a given collection seed.
pub fn episode_seeds(seed: u64, n_episodes: usize) -> Vec<u64> {
    (0..n_episodes as u64).map(|i| seed::child(seed, i)).collect()
}

/// Record `n_episodes` expert episodes on seeds derived from `seed`.
pub fn collect_demos(
    env: &mut dyn Env,
    expert: &mut dyn Actor,
    n_episodes: usize,
    seed: u64,
) -> Result<DemoSet> {
    if n_episodes == 0 {
        return Err(Error::invalid("need at least one demo episode"));
    }
    let mut set = DemoSet::new(env.name(), env.obs_dim(), env.act_dim(), env.trace_dim());
    for s in episode_seeds(seed, n_episodes) {
        set.episodes.push(record_episode(env, expert, s)?);
    }
    Ok(set)
}
