//! Experiment configuration: a TOML file, then `CMZ_*` environment overrides,
//! then command-line flags, resolved into one explicit snapshot.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cmz_core::envs::EnvKind;
use cmz_core::trainer::{Condition, TrainRunConfig};
use serde::{Deserialize, Serialize};
use toml::Value;

/// Environment variables with this prefix override config keys. Nested keys
/// are joined with `__`, e.g. `CMZ_TRAIN__PPO__ROLLOUT_STEPS=512`.
pub const ENV_PREFIX: &str = "CMZ_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub out: PathBuf,
    pub conditions: Vec<Condition>,
    pub trials: usize,
    /// Worker threads for suite-level parallelism.
    pub workers: usize,
    pub plots: bool,
    /// Gaussian σ applied to metric series before plotting.
    pub smoothing_sigma: f64,
    pub train: TrainRunConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("runs"),
            conditions: vec![
                Condition::Bc,
                Condition::Cmz,
                Condition::Dril,
                Condition::Zero,
                Condition::TrueEnv,
            ],
            trials: 5,
            workers: 1,
            plots: true,
            smoothing_sigma: 2.0,
            train: TrainRunConfig::default(),
        }
    }
}

/// Values given on the command line; `None` leaves the file/env value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub env: Option<EnvKind>,
    pub conditions: Option<Vec<Condition>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Resolve file → environment variables → flags.
    pub fn resolve<I>(path: Option<&Path>, vars: I, overrides: &Overrides) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>()
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        let mut vars: Vec<(String, String)> = vars
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        vars.sort();
        for (key, raw) in vars {
            apply_env_override(&mut table, &key[ENV_PREFIX.len()..], &raw)
                .with_context(|| format!("applying {key}"))?;
        }
        let mut config: ExperimentConfig = Value::Table(table)
            .try_into()
            .context("invalid configuration")?;
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(env) = o.env {
            self.train.env = env;
        }
        if let Some(c) = &o.conditions {
            self.conditions = c.clone();
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
        if let Some(s) = o.seed {
            self.train.seed = s;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if self.conditions.is_empty() {
            bail!("no conditions given");
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if self.conditions[..i].contains(c) {
                bail!("condition {c} listed twice");
            }
        }
        if !(self.smoothing_sigma >= 0.0) {
            bail!("smoothing_sigma must be non-negative");
        }
        self.train.validate()?;
        Ok(())
    }

    /// Training config for one trial.
    pub fn run_config(&self, trial: u64) -> TrainRunConfig {
        TrainRunConfig {
            trial,
            ..self.train.clone()
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).context("serializing config snapshot (seeds must fit in i64)")
    }
}

fn apply_env_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let path: Vec<String> = key.split("__").map(str::to_ascii_lowercase).collect();
    if path.iter().any(String::is_empty) {
        bail!("malformed override key");
    }
    let value = parse_value(raw);
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut node = table;
    for p in parents {
        let entry = node
            .entry(p.clone())
            .or_insert_with(|| Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .with_context(|| format!("{p} is not a table"))?;
    }
    node.insert(last.clone(), value);
    Ok(())
}

/// TOML literal if it parses as one (numbers, booleans, arrays), else a bare string.
fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}
