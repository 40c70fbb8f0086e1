//! Behavioral cloning and the bootstrap ensemble whose disagreement drives
//! the shaped rewards.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use crate::envs::DemoSet;
use crate::nn::{checkpoint, Adam, AdamConfig, GaussianPolicy, Parameters, Trace};
use crate::{seed, Error, Result};

/// Demo sets at least this large are trained in minibatches.
pub const FULL_BATCH_LIMIT: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcConfig {
    pub epochs: usize,
    pub lr: f64,
    /// `None`: full batch below [`FULL_BATCH_LIMIT`] pairs, otherwise 64.
    pub batch_size: Option<usize>,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            lr: 1e-3,
            batch_size: None,
        }
    }
}

impl BcConfig {
    pub fn batch_for(&self, pairs: usize) -> usize {
        match self.batch_size {
            Some(b) => b.max(1),
            None if pairs < FULL_BATCH_LIMIT => pairs,
            None => 64,
        }
    }
}

/// NLL minimizer with persistent Adam state, so repeated single-epoch passes
/// (the interleaved phase of training) keep their moment estimates.
#[derive(Debug, Clone)]
pub struct BcTrainer {
    optimizer: Adam,
    batch_size: Option<usize>,
    trace: Trace,
}

impl BcTrainer {
    pub fn new(policy: &GaussianPolicy, config: &BcConfig) -> Self {
        Self {
            optimizer: Adam::new(AdamConfig::with_lr(config.lr), &policy.parameters()),
            batch_size: config.batch_size,
            trace: Trace::default(),
        }
    }

    /// One shuffled pass over every pair; returns the mean per-pair NLL.
    pub fn epoch<R: Rng>(
        &mut self,
        policy: &mut GaussianPolicy,
        demos: &DemoSet,
        rng: &mut R,
    ) -> Result<f64> {
        check_demos(policy, demos)?;
        let pairs: Vec<(&[f64], &[f64])> = demos.pairs().collect();
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(rng);
        let cfg = BcConfig {
            batch_size: self.batch_size,
            ..BcConfig::default()
        };
        let batch = cfg.batch_for(pairs.len());
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            policy.zero_grad();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let (obs, act) = pairs[i];
                total += policy.nll_backward(obs, act, scale, &mut self.trace);
            }
            self.optimizer.step(&mut policy.parameters_mut());
            policy.clamp_log_std();
        }
        policy.zero_grad();
        let mean = total / pairs.len() as f64;
        if !mean.is_finite() || !policy.all_finite() {
            return Err(Error::NonFinite("behavioral cloning loss diverged".into()));
        }
        Ok(mean)
    }
}

fn check_demos(policy: &GaussianPolicy, demos: &DemoSet) -> Result<()> {
    if demos.is_empty() {
        return Err(Error::invalid("demo set is empty"));
    }
    if demos.obs_dim != policy.obs_dim() || demos.act_dim != policy.act_dim() {
        return Err(Error::invalid(format!(
            "demos are {}→{}, policy is {}→{}",
            demos.obs_dim,
            demos.act_dim,
            policy.obs_dim(),
            policy.act_dim()
        )));
    }
    Ok(())
}

/// Behavioral cloning: Adam on mean Gaussian NLL. Returns the per-epoch mean loss.
pub fn bc_train(
    policy: &mut GaussianPolicy,
    demos: &DemoSet,
    config: &BcConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    check_demos(policy, demos)?;
    let mut trainer = BcTrainer::new(policy, config);
    let mut rng = seed::rng(seed);
    (0..config.epochs)
        .map(|_| trainer.epoch(policy, demos, &mut rng))
        .collect()
}

/// Mean per-pair NLL without touching gradients.
pub fn mean_nll(policy: &GaussianPolicy, demos: &DemoSet) -> Result<f64> {
    check_demos(policy, demos)?;
    let mut total = 0.0;
    for (o, a) in demos.pairs() {
        total -= policy.log_prob(o, a)?;
    }
    Ok(total / demos.num_pairs() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub k: usize,
    pub init_seeds: Vec<u64>,
    /// Episode indices each member was trained on.
    pub resamples: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<GaussianPolicy>,
    manifest: EnsembleManifest,
}

impl Ensemble {
    pub fn from_members(members: Vec<GaussianPolicy>, manifest: EnsembleManifest) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::invalid("an ensemble needs at least two members"));
        }
        let (o, a) = (members[0].obs_dim(), members[0].act_dim());
        if members.iter().any(|m| m.obs_dim() != o || m.act_dim() != a) {
            return Err(Error::invalid("ensemble members disagree on dimensions"));
        }
        if manifest.k != members.len() {
            return Err(Error::invalid("manifest member count does not match"));
        }
        Ok(Self { members, manifest })
    }

    pub fn members(&self) -> &[GaussianPolicy] {
        &self.members
    }

    pub fn manifest(&self) -> &EnsembleManifest {
        &self.manifest
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn obs_dim(&self) -> usize {
        self.members[0].obs_dim()
    }

    /// Disagreement `u`: mean over action dimensions of the population std of
    /// member means. Per-dimension values are sorted before reduction so the
    /// result is bitwise independent of member order.
    pub fn std(&self, obs: &[f64]) -> Result<f64> {
        if obs.len() != self.obs_dim() {
            return Err(Error::invalid(format!(
                "observation has length {}, ensemble expects {}",
                obs.len(),
                self.obs_dim()
            )));
        }
        let means: Vec<Vec<f64>> = self.members.iter().map(|m| m.mean_unchecked(obs)).collect();
        Ok(disagreement(&means))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (i, m) in self.members.iter().enumerate() {
            checkpoint::save_policy(&dir.join(format!("member_{i}.ckpt")), m)?;
        }
        let manifest = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::Format(e.to_string()))?;
        fs::write(dir.join("manifest.json"), manifest)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: EnsembleManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)
                .map_err(|e| Error::Format(e.to_string()))?;
        let members = (0..manifest.k)
            .map(|i| checkpoint::load_policy(&dir.join(format!("member_{i}.ckpt"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_members(members, manifest)
    }
}

/// `means[k][d]` → mean over d of population std over k.
pub(crate) fn disagreement(means: &[Vec<f64>]) -> f64 {
    let k = means.len();
    let act_dim = means[0].len();
    let mut column = Vec::with_capacity(k);
    let mut total = 0.0;
    for d in 0..act_dim {
        column.clear();
        column.extend(means.iter().map(|m| m[d]));
        column.sort_by(f64::total_cmp);
        if column[0] == column[k - 1] {
            continue;
        }
        let mean = column.iter().sum::<f64>() / k as f64;
        let var = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / k as f64;
        total += var.sqrt();
    }
    total / act_dim as f64
}

pub fn ensemble_std(ensemble: &Ensemble, obs: &[f64]) -> Result<f64> {
    ensemble.std(obs)
}

/// Train `k` members, each on an episode-level bootstrap resample with its own init seed.
pub fn train_ensemble(demos: &DemoSet, k: usize, config: &BcConfig, seed: u64) -> Result<Ensemble> {
    if k < 2 {
        return Err(Error::invalid(format!("ensemble size must be at least 2, got {k}")));
    }
    if demos.episodes.is_empty() {
        return Err(Error::invalid("demo set is empty"));
    }
    let n = demos.episodes.len();
    let mut members = Vec::with_capacity(k);
    let mut manifest = EnsembleManifest {
        k,
        init_seeds: Vec::with_capacity(k),
        resamples: Vec::with_capacity(k),
    };
    for m in 0..k as u64 {
        let init_seed = seed::child(seed, 3 * m);
        let mut rng = seed::rng(seed::child(seed, 3 * m + 1));
        let picks: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut policy = GaussianPolicy::new(demos.obs_dim, demos.act_dim, init_seed);
        bc_train(&mut policy, &demos.select(&picks), config, seed::child(seed, 3 * m + 2))?;
        members.push(policy);
        manifest.init_seeds.push(init_seed);
        manifest.resamples.push(picks);
    }
    Ensemble::from_members(members, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::DemoEpisode;

    pub(crate) fn synthetic_demos(seed: u64, episodes: usize, len: usize) -> DemoSet {
        let mut rng = crate::seed::rng(seed);
        let mut set = DemoSet::new("synthetic", 3, 1, 1);
        for e in 0..episodes {
            let mut ep = DemoEpisode {
                seed: e as u64,
                observations: vec![],
                actions: vec![],
                rewards: vec![],
                trace: vec![0.0],
            };
            for _ in 0..len {
                let o: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.5];
                ep.observations.extend_from_slice(&o);
                ep.actions.push(0.8 * o[0] - 0.3 * o[1]);
                ep.rewards.push(0.0);
                ep.trace.push(0.0);
            }
            set.episodes.push(ep);
        }
        set
    }

    #[test]
    fn two_point_population_std() {
        assert_eq!(disagreement(&[vec![0.0], vec![1.0]]), 0.5);
    }

    #[test]
    fn identical_members_have_zero_disagreement() {
        let p = GaussianPolicy::new(3, 2, 4);
        let manifest = EnsembleManifest { k: 3, init_seeds: vec![4; 3], resamples: vec![vec![]; 3] };
        let e = Ensemble::from_members(vec![p.clone(), p.clone(), p], manifest).unwrap();
        for x in [-1.0, 0.1, 0.7] {
            assert_eq!(e.std(&[x, 0.3, -x]).unwrap(), 0.0);
        }
    }

    #[test]
    fn ensemble_size_boundary() {
        let demos = synthetic_demos(1, 2, 10);
        let cfg = BcConfig { epochs: 2, ..Default::default() };
        assert!(train_ensemble(&demos, 1, &cfg, 0).is_err());
        assert_eq!(train_ensemble(&demos, 2, &cfg, 0).unwrap().k(), 2);
    }

    #[test]
    fn empty_demos_rejected() {
        let mut p = GaussianPolicy::new(3, 1, 0);
        let empty = DemoSet::new("synthetic", 3, 1, 1);
        assert!(matches!(
            bc_train(&mut p, &empty, &BcConfig::default(), 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn batch_rule() {
        let c = BcConfig::default();
        assert_eq!(c.batch_for(300), 300);
        assert_eq!(c.batch_for(512), 64);
        assert_eq!(BcConfig { batch_size: Some(10), ..c }.batch_for(300), 10);
    }
}
