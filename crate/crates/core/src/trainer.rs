//! End-to-end training runs: pretrain an imitator and the ensemble on expert
//! demos, then alternate PPO updates on the shaped reward with one NLL pass
//! over the demos, evaluating on held-out seeded episodes.

use serde::{Deserialize, Serialize};

use crate::envs::{collect_demos, episode_seeds, record_episode, Deterministic, DemoSet, EnvKind, Expert};
use crate::imitation::{bc_train, train_ensemble, BcConfig, BcTrainer, Ensemble};
use crate::metrics::{action_mse, evaluate_against_expert};
use crate::nn::GaussianPolicy;
use crate::ppo::{collect_rollouts, PpoConfig, PpoDiagnostics, PpoLearner, RolloutStats, ValueNet};
use crate::reward::{calibrate_dril_threshold, RewardShaper, ShaperConfig, ShaperMode};
use crate::seed::{self, SeedRole};
use crate::summary::{summarize, RunScores, SummaryTable};
use crate::{Error, Result};

/// A row of the comparison: behavioral cloning alone, or the full loop with a reward mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Bc,
    Cmz,
    Dril,
    Penalty,
    Zero,
    TrueEnv,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::Bc,
        Condition::Cmz,
        Condition::Dril,
        Condition::Penalty,
        Condition::Zero,
        Condition::TrueEnv,
    ];

    pub fn shaper_mode(self) -> Option<ShaperMode> {
        match self {
            Condition::Bc => None,
            Condition::Cmz => Some(ShaperMode::Cmz),
            Condition::Dril => Some(ShaperMode::Dril),
            Condition::Penalty => Some(ShaperMode::Penalty),
            Condition::Zero => Some(ShaperMode::Zero),
            Condition::TrueEnv => Some(ShaperMode::TrueEnv),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Condition::Bc => "bc",
            Condition::Cmz => "cmz",
            Condition::Dril => "dril",
            Condition::Penalty => "penalty",
            Condition::Zero => "zero",
            Condition::TrueEnv => "true_env",
        }
    }

    /// Row label in summary tables.
    pub fn label(self) -> &'static str {
        match self {
            Condition::Bc => "Behavioral Cloning",
            Condition::Cmz => "CMZ-DRIL",
            Condition::Dril => "DRIL Reward",
            Condition::Penalty => "Penalty Reward",
            Condition::Zero => "No Reward",
            Condition::TrueEnv => "True Env Reward",
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown condition {s:?} (expected one of bc, cmz, dril, penalty, zero, true_env)"
                ))
            })
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRunConfig {
    pub env: EnvKind,
    pub demo_episodes: usize,
    pub ensemble_k: usize,
    pub shaper: ShaperConfig,
    pub ppo: PpoConfig,
    pub bc: BcConfig,
    pub nll_epochs_per_cycle: usize,
    /// Interleaved NLL passes use `bc.lr × nll_lr_factor`.
    pub nll_lr_factor: f64,
    pub total_updates: usize,
    pub eval_episodes: usize,
    pub eval_interval: usize,
    pub seed: u64,
    /// Trial index; together with `seed` it keys every random stream.
    pub trial: u64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::Waypoint,
            demo_episodes: 5,
            ensemble_k: 5,
            // The running mean spans the whole run; a per-episode reset makes
            // every step of a long episode costly and rewards early crashes.
            shaper: ShaperConfig {
                reset_per_episode: false,
                ..ShaperConfig::default()
            },
            ppo: PpoConfig::default(),
            bc: BcConfig::default(),
            nll_epochs_per_cycle: 1,
            nll_lr_factor: 0.1,
            total_updates: 150,
            eval_episodes: 5,
            eval_interval: 1,
            seed: 0,
            trial: 0,
        }
    }
}

impl TrainRunConfig {
    pub fn validate(&self) -> Result<()> {
        self.shaper.validate()?;
        self.ppo.validate()?;
        if self.total_updates == 0 {
            return Err(Error::config("total_updates must be at least 1"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes must be at least 1"));
        }
        if self.eval_interval == 0 {
            return Err(Error::config("eval_interval must be at least 1"));
        }
        if self.demo_episodes == 0 {
            return Err(Error::config("demo_episodes must be at least 1"));
        }
        if self.ensemble_k < 2 {
            return Err(Error::config("ensemble_k must be at least 2"));
        }
        if !(self.nll_lr_factor >= 0.0) {
            return Err(Error::config("nll_lr_factor must be non-negative"));
        }
        Ok(())
    }

    pub fn seed_for(&self, role: SeedRole) -> u64 {
        seed::derive(self.seed, self.trial, role)
    }

    /// Updates after which an evaluation runs: every multiple of the interval, plus the last.
    pub fn eval_checkpoints(&self) -> Vec<usize> {
        let mut points: Vec<usize> = (1..=self.total_updates)
            .filter(|u| u % self.eval_interval == 0)
            .collect();
        if points.last() != Some(&self.total_updates) {
            points.push(self.total_updates);
        }
        points
    }
}

/// Held-out evaluation at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub update: usize,
    pub reward: f64,
    pub frechet: f64,
    pub mse: f64,
}

/// Training-side statistics of one PPO cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRow {
    pub update: usize,
    pub mean_shaped_reward: f64,
    pub mean_true_reward: f64,
    pub mean_episode_return: Option<f64>,
    pub mean_disagreement: f64,
    pub ppo: PpoDiagnostics,
    pub nll_loss: f64,
}

/// Order of optimization phases, for checking the interleave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Phase {
    Ppo { update: usize },
    Nll { update: usize, loss: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub condition: Condition,
    pub trial: u64,
    pub env: EnvKind,
    pub bc_losses: Vec<f64>,
    pub evals: Vec<EvalRow>,
    pub updates: Vec<UpdateRow>,
    pub phases: Vec<Phase>,
    pub dril_threshold: Option<f64>,
    pub policy: GaussianPolicy,
    pub ensemble: Option<Ensemble>,
}

impl TrainRecord {
    pub fn eval_rewards(&self) -> Vec<f64> {
        self.evals.iter().map(|e| e.reward).collect()
    }
}

/// Expert demonstrations for one trial: training set and held-out evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialData {
    pub train: DemoSet,
    pub eval: DemoSet,
    pub eval_seed: u64,
}

pub fn trial_data(config: &TrainRunConfig) -> Result<TrialData> {
    let mut env = config.env.make();
    let train = collect_demos(
        env.as_mut(),
        &mut Expert,
        config.demo_episodes,
        config.seed_for(SeedRole::Demos),
    )?;
    let eval_seed = config.seed_for(SeedRole::Eval);
    let eval = collect_demos(env.as_mut(), &mut Expert, config.eval_episodes, eval_seed)?;
    Ok(TrialData {
        train,
        eval,
        eval_seed,
    })
}

/// Imitator and ensemble after the supervised phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Pretrained {
    pub imitator: GaussianPolicy,
    pub bc_losses: Vec<f64>,
    pub ensemble: Ensemble,
}

pub fn pretrain_imitator(config: &TrainRunConfig, demos: &DemoSet) -> Result<(GaussianPolicy, Vec<f64>)> {
    let base = config.seed_for(SeedRole::Imitator);
    let mut policy = GaussianPolicy::new(demos.obs_dim, demos.act_dim, seed::child(base, 0));
    let losses = bc_train(&mut policy, demos, &config.bc, seed::child(base, 1))?;
    Ok((policy, losses))
}

pub fn pretrain(config: &TrainRunConfig, demos: &DemoSet) -> Result<Pretrained> {
    let (imitator, bc_losses) = pretrain_imitator(config, demos)?;
    let ensemble = train_ensemble(
        demos,
        config.ensemble_k,
        &config.bc,
        config.seed_for(SeedRole::Ensemble),
    )?;
    Ok(Pretrained {
        imitator,
        bc_losses,
        ensemble,
    })
}

/// Deterministic (policy-mean) evaluation on the held-out expert seeds.
pub fn evaluate(policy: &GaussianPolicy, env: EnvKind, eval: &DemoSet, update: usize) -> Result<EvalRow> {
    let mut e = env.make();
    let summary = evaluate_against_expert(&mut Deterministic(policy), e.as_mut(), eval)?;
    let row = EvalRow {
        update,
        reward: summary.mean_reward(),
        frechet: summary.mean_frechet(),
        mse: action_mse(policy, eval)?,
    };
    if !(row.reward.is_finite() && row.frechet.is_finite() && row.mse.is_finite()) {
        return Err(Error::NonFinite(format!("evaluation metrics {row:?}")));
    }
    Ok(row)
}

/// Behavioral-cloning record from an already pretrained imitator. The policy
/// never changes, so the single evaluation fills every checkpoint.
pub fn bc_record(config: &TrainRunConfig, data: &TrialData, imitator: &GaussianPolicy, bc_losses: &[f64]) -> Result<TrainRecord> {
    let row = evaluate(imitator, config.env, &data.eval, 0)?;
    let evals = config
        .eval_checkpoints()
        .into_iter()
        .map(|update| EvalRow { update, ..row })
        .collect();
    Ok(TrainRecord {
        condition: Condition::Bc,
        trial: config.trial,
        env: config.env,
        bc_losses: bc_losses.to_vec(),
        evals,
        updates: Vec::new(),
        phases: Vec::new(),
        dril_threshold: None,
        policy: imitator.clone(),
        ensemble: None,
    })
}

/// PPO + NLL interleaved phase, starting from a pretrained imitator.
pub fn train_shaped(
    config: &TrainRunConfig,
    mode: ShaperMode,
    data: &TrialData,
    pretrained: &Pretrained,
) -> Result<TrainRecord> {
    config.validate()?;
    let shaper_config = ShaperConfig {
        mode,
        ..config.shaper.clone()
    };
    let mut shaper = RewardShaper::new(&shaper_config)?;
    let ensemble = &pretrained.ensemble;
    let dril_threshold = if mode == ShaperMode::Dril {
        let t = calibrate_dril_threshold(ensemble, &data.train, shaper_config.dril_quantile)?;
        shaper = shaper.with_threshold(t);
        Some(t)
    } else {
        None
    };

    let mut policy = pretrained.imitator.clone();
    let net_seed = config.seed_for(SeedRole::Imitator);
    let mut value_net = ValueNet::new(policy.obs_dim(), seed::child(net_seed, 2));
    let mut learner = PpoLearner::new(config.ppo.clone(), &policy, &value_net)?;
    let nll_config = BcConfig {
        lr: config.bc.lr * config.nll_lr_factor,
        ..config.bc.clone()
    };
    let mut nll = BcTrainer::new(&policy, &nll_config);
    let mut nll_rng = seed::rng(seed::child(config.seed_for(SeedRole::Minibatch), u64::MAX));

    let env_kind = config.env;
    let factory = move || env_kind.make();
    let rollout_seed = config.seed_for(SeedRole::Rollout);
    let minibatch_seed = config.seed_for(SeedRole::Minibatch);
    let checkpoints = config.eval_checkpoints();

    let mut updates = Vec::with_capacity(config.total_updates);
    let mut phases = Vec::with_capacity(2 * config.total_updates);
    let mut evals = Vec::with_capacity(checkpoints.len());
    for update in 1..=config.total_updates {
        let batch = collect_rollouts(
            &factory,
            &policy,
            &value_net,
            &mut shaper,
            Some(ensemble),
            config.ppo.rollout_steps,
            seed::child(rollout_seed, update as u64),
        )?;
        let stats = RolloutStats::from_batch(&batch);
        let diag = learner.update(
            &mut policy,
            &mut value_net,
            &batch,
            seed::child(minibatch_seed, update as u64),
        )?;
        phases.push(Phase::Ppo { update });

        let mut nll_loss = 0.0;
        for _ in 0..config.nll_epochs_per_cycle {
            nll_loss = nll.epoch(&mut policy, &data.train, &mut nll_rng)?;
            phases.push(Phase::Nll {
                update,
                loss: nll_loss,
            });
        }
        updates.push(UpdateRow {
            update,
            mean_shaped_reward: stats.mean_shaped_reward,
            mean_true_reward: stats.mean_true_reward,
            mean_episode_return: stats.mean_episode_return,
            mean_disagreement: stats.mean_disagreement,
            ppo: diag,
            nll_loss,
        });
        if checkpoints.contains(&update) {
            evals.push(evaluate(&policy, config.env, &data.eval, update)?);
        }
    }

    Ok(TrainRecord {
        condition: condition_for(mode),
        trial: config.trial,
        env: config.env,
        bc_losses: pretrained.bc_losses.clone(),
        evals,
        updates,
        phases,
        dril_threshold,
        policy,
        ensemble: Some(ensemble.clone()),
    })
}

fn condition_for(mode: ShaperMode) -> Condition {
    match mode {
        ShaperMode::Cmz => Condition::Cmz,
        ShaperMode::Dril => Condition::Dril,
        ShaperMode::Penalty => Condition::Penalty,
        ShaperMode::Zero => Condition::Zero,
        ShaperMode::TrueEnv => Condition::TrueEnv,
    }
}

/// Run one condition given shared trial data and pretraining.
pub fn run_condition(
    config: &TrainRunConfig,
    condition: Condition,
    data: &TrialData,
    pretrained: &Pretrained,
) -> Result<TrainRecord> {
    match condition.shaper_mode() {
        None => bc_record(config, data, &pretrained.imitator, &pretrained.bc_losses),
        Some(mode) => train_shaped(config, mode, data, pretrained),
    }
}

/// Full loop with the configured reward mode (CMZ by default).
pub fn run_cmz_dril(config: &TrainRunConfig) -> Result<TrainRecord> {
    config.validate()?;
    let data = trial_data(config)?;
    let pretrained = pretrain(config, &data.train)?;
    train_shaped(config, config.shaper.mode, &data, &pretrained)
}

/// Behavioral cloning baseline: demos and imitator pretraining only.
pub fn run_baseline_bc(config: &TrainRunConfig) -> Result<TrainRecord> {
    config.validate()?;
    let data = trial_data(config)?;
    let (imitator, losses) = pretrain_imitator(config, &data.train)?;
    bc_record(config, &data, &imitator, &losses)
}

/// Result of a multi-trial comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    /// `records[trial][condition]`, conditions in request order.
    pub records: Vec<Vec<TrainRecord>>,
    pub table: SummaryTable,
}

/// Every condition on `n_trials` trials. Within a trial, all conditions share
/// demos, evaluation seeds and pretrained networks.
pub fn run_condition_suite(
    base: &TrainRunConfig,
    conditions: &[Condition],
    n_trials: usize,
) -> Result<SuiteResult> {
    if n_trials == 0 {
        return Err(Error::config("n_trials must be at least 1"));
    }
    if conditions.is_empty() {
        return Err(Error::config("no conditions requested"));
    }
    base.validate()?;
    let mut records = Vec::with_capacity(n_trials);
    for trial in 0..n_trials as u64 {
        let config = TrainRunConfig {
            trial,
            ..base.clone()
        };
        let data = trial_data(&config)?;
        let pretrained = pretrain(&config, &data.train)?;
        let row = conditions
            .iter()
            .map(|&c| run_condition(&config, c, &data, &pretrained))
            .collect::<Result<Vec<_>>>()?;
        records.push(row);
    }
    let scores: Vec<RunScores> = records.iter().flatten().map(RunScores::from).collect();
    let table = summarize(&scores, conditions, None)?;
    Ok(SuiteResult { records, table })
}

/// Mean true return of `episodes` rollouts of the expert, a reference point for reports.
pub fn expert_reference(env: EnvKind, episodes: usize, seed: u64) -> Result<f64> {
    let mut e = env.make();
    let seeds = episode_seeds(seed, episodes);
    let mut total = 0.0;
    for s in &seeds {
        total += record_episode(e.as_mut(), &mut Expert, *s)?.total_reward();
    }
    Ok(total / seeds.len().max(1) as f64)
}
