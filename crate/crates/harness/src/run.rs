//! Run directories, resumable per (trial, condition), and the parallel suite.
//!
//! ```text
//! <out>/<env>/config.toml  summary.md  summary.json
//! <out>/<env>/trial_<t>/shared/      demos, imitator, ensemble (reused by every condition)
//! <out>/<env>/trial_<t>/<condition>/ config.toml demos_*.cmzd policy.ckpt metrics.csv
//!                                    diagnostics.csv phases.csv record.json metrics.svg
//! <out>/<env>/trial_<t>/comparison.svg
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cmz_core::envs::DemoSet;
use cmz_core::imitation::Ensemble;
use cmz_core::metrics::gaussian_smooth;
use cmz_core::nn::checkpoint;
use cmz_core::summary::{final_window_len, summarize, RunScores, SummaryTable};
use cmz_core::trainer::{pretrain, run_condition, trial_data, Condition, Phase, Pretrained, TrainRecord, TrialData, TrainRunConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::plot;

pub fn env_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join(cfg.train.env.name())
}

pub fn trial_dir(cfg: &ExperimentConfig, trial: u64) -> PathBuf {
    env_dir(cfg).join(format!("trial_{trial}"))
}

pub fn run_dir(cfg: &ExperimentConfig, trial: u64, condition: Condition) -> PathBuf {
    trial_dir(cfg, trial).join(condition.name())
}

fn snapshot(run: &TrainRunConfig) -> Result<String> {
    toml::to_string(run).context("serializing run config")
}

/// Whether `dir` holds a finished artifact produced from exactly `snap`.
fn is_complete(dir: &Path, snap: &str, marker: &str) -> bool {
    dir.join(marker).is_file()
        && fs::read_to_string(dir.join("config.toml")).map(|s| s == snap).unwrap_or(false)
}

#[derive(Debug, Serialize, Deserialize)]
struct TrialMeta {
    eval_seed: u64,
    bc_losses: Vec<f64>,
}

/// Demos, imitator and ensemble for one trial, loaded if already on disk.
pub fn prepare_trial(cfg: &ExperimentConfig, trial: u64) -> Result<(TrialData, Pretrained)> {
    let run = cfg.run_config(trial);
    let dir = trial_dir(cfg, trial).join("shared");
    let snap = snapshot(&run)?;
    if is_complete(&dir, &snap, "trial.json") {
        let meta: TrialMeta = serde_json::from_str(&fs::read_to_string(dir.join("trial.json"))?)?;
        let data = TrialData {
            train: DemoSet::load(&dir.join("demos_train.cmzd"))?,
            eval: DemoSet::load(&dir.join("demos_eval.cmzd"))?,
            eval_seed: meta.eval_seed,
        };
        let pre = Pretrained {
            imitator: checkpoint::load_policy(&dir.join("imitator.ckpt"))?,
            bc_losses: meta.bc_losses,
            ensemble: Ensemble::load(&dir.join("ensemble"))?,
        };
        return Ok((data, pre));
    }
    let data = trial_data(&run)?;
    let pre = pretrain(&run, &data.train)?;
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), &snap)?;
    data.train.save(&dir.join("demos_train.cmzd"))?;
    data.eval.save(&dir.join("demos_eval.cmzd"))?;
    checkpoint::save_policy(&dir.join("imitator.ckpt"), &pre.imitator)?;
    pre.ensemble.save(&dir.join("ensemble"))?;
    let meta = TrialMeta {
        eval_seed: data.eval_seed,
        bc_losses: pre.bc_losses.clone(),
    };
    // Written last: its presence marks the directory complete.
    fs::write(dir.join("trial.json"), serde_json::to_string(&meta)?)?;
    Ok((data, pre))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunRecordFile {
    scores: RunScores,
    final_window: usize,
    final_window_reward: f64,
    dril_threshold: Option<f64>,
}

/// Metrics CSV body for a record's evaluation rows.
pub fn metrics_csv(record: &TrainRecord, sigma: f64) -> Result<String> {
    let col = |f: fn(&cmz_core::trainer::EvalRow) -> f64| record.evals.iter().map(f).collect::<Vec<_>>();
    let (reward, frechet, mse) = (col(|e| e.reward), col(|e| e.frechet), col(|e| e.mse));
    let (rs, fs_, ms) = (
        gaussian_smooth(&reward, sigma),
        gaussian_smooth(&frechet, sigma),
        gaussian_smooth(&mse, sigma),
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "reward_raw", "reward_smooth", "frechet_raw", "frechet_smooth", "mse_raw", "mse_smooth"])?;
    for (i, e) in record.evals.iter().enumerate() {
        w.write_record([
            e.update.to_string(),
            reward[i].to_string(),
            rs[i].to_string(),
            frechet[i].to_string(),
            fs_[i].to_string(),
            mse[i].to_string(),
            ms[i].to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn diagnostics_csv(record: &TrainRecord) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "update",
        "mean_shaped_reward",
        "mean_true_reward",
        "mean_episode_return",
        "mean_disagreement",
        "policy_loss",
        "value_loss",
        "approx_kl",
        "clip_fraction",
        "entropy",
        "nll_loss",
    ])?;
    for u in &record.updates {
        w.write_record([
            u.update.to_string(),
            u.mean_shaped_reward.to_string(),
            u.mean_true_reward.to_string(),
            u.mean_episode_return.map(|r| r.to_string()).unwrap_or_default(),
            u.mean_disagreement.to_string(),
            u.ppo.policy_loss.to_string(),
            u.ppo.value_loss.to_string(),
            u.ppo.approx_kl.to_string(),
            u.ppo.clip_fraction.to_string(),
            u.ppo.entropy.to_string(),
            u.nll_loss.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn phases_csv(record: &TrainRecord) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["phase", "update", "loss"])?;
    for p in &record.phases {
        match *p {
            Phase::Ppo { update } => w.write_record(["ppo", &update.to_string(), ""])?,
            Phase::Nll { update, loss } => w.write_record(["nll", &update.to_string(), &loss.to_string()])?,
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Train one condition of one trial (or load its finished record).
pub fn run_one(
    cfg: &ExperimentConfig,
    trial: u64,
    condition: Condition,
    data: &TrialData,
    pre: &Pretrained,
) -> Result<RunScores> {
    let run = cfg.run_config(trial);
    let dir = run_dir(cfg, trial, condition);
    let snap = snapshot(&run)?;
    if is_complete(&dir, &snap, "record.json") {
        let rec: RunRecordFile = serde_json::from_str(&fs::read_to_string(dir.join("record.json"))?)?;
        return Ok(rec.scores);
    }
    let record = run_condition(&run, condition, data, pre)
        .with_context(|| format!("trial {trial}, condition {condition}"))?;
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), &snap)?;
    data.train.save(&dir.join("demos_train.cmzd"))?;
    data.eval.save(&dir.join("demos_eval.cmzd"))?;
    checkpoint::save_policy(&dir.join("policy.ckpt"), &record.policy)?;
    let metrics = metrics_csv(&record, cfg.smoothing_sigma)?;
    fs::write(dir.join("metrics.csv"), &metrics)?;
    fs::write(dir.join("diagnostics.csv"), diagnostics_csv(&record)?)?;
    fs::write(dir.join("phases.csv"), phases_csv(&record)?)?;
    if cfg.plots {
        let panels = plot::panels_from_csv(&dir.join("metrics.csv"), condition.name())?;
        fs::write(dir.join("metrics.svg"), plot::render(&panels))?;
    }
    let scores = RunScores::from(&record);
    let window = final_window_len(scores.rewards.len());
    let tail = &scores.rewards[scores.rewards.len() - window..];
    let file = RunRecordFile {
        final_window: window,
        final_window_reward: tail.iter().sum::<f64>() / window as f64,
        dril_threshold: record.dril_threshold,
        scores: scores.clone(),
    };
    fs::write(dir.join("record.json"), serde_json::to_string_pretty(&file)?)?;
    Ok(scores)
}

/// Text of the summary file.
pub fn summary_text(cfg: &ExperimentConfig, table: &SummaryTable) -> String {
    let checkpoints = cfg.train.eval_checkpoints().len();
    format!(
        "{}\nMean final-window evaluation reward (sample std across {} trial{}).\nFinal window: last {} of {} checkpoints.\n",
        table.render(),
        cfg.trials,
        if cfg.trials == 1 { "" } else { "s" },
        final_window_len(checkpoints),
        checkpoints
    )
}

fn comparison_plot(cfg: &ExperimentConfig, trial: u64) -> Result<()> {
    let sets = cfg
        .conditions
        .iter()
        .map(|&c| plot::panels_from_csv(&run_dir(cfg, trial, c).join("metrics.csv"), c.label()))
        .collect::<Result<Vec<_>>>()?;
    fs::write(trial_dir(cfg, trial).join("comparison.svg"), plot::render(&plot::overlay(sets)))?;
    Ok(())
}

/// Every condition on every trial, bounded by `cfg.workers` threads.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SummaryTable> {
    cfg.validate()?;
    let root = env_dir(cfg);
    fs::create_dir_all(&root)?;
    fs::write(root.join("config.toml"), cfg.to_toml()?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .context("building worker pool")?;
    let per_trial: Vec<Vec<RunScores>> = pool.install(|| {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|trial| -> Result<Vec<RunScores>> {
                let (data, pre) = prepare_trial(cfg, trial)?;
                let scores = cfg
                    .conditions
                    .par_iter()
                    .map(|&c| {
                        let s = run_one(cfg, trial, c, &data, &pre)?;
                        eprintln!("trial {trial} {c}: done");
                        Ok(s)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if cfg.plots {
                    comparison_plot(cfg, trial)?;
                }
                Ok(scores)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let scores: Vec<RunScores> = per_trial.into_iter().flatten().collect();
    let table = summarize(&scores, &cfg.conditions, None)?;
    fs::write(root.join("summary.md"), summary_text(cfg, &table))?;
    fs::write(root.join("summary.json"), serde_json::to_string_pretty(&table)?)?;
    Ok(table)
}
