//! Aggregation of evaluation rewards across trials into "mean (std)" tables.

use serde::{Deserialize, Serialize};

use crate::envs::EnvKind;
use crate::trainer::{Condition, TrainRecord};
use crate::{Error, Result};

/// Window length: the last 100 checkpoints, or the last quarter of shorter runs.
pub fn final_window_len(n_checkpoints: usize) -> usize {
    if n_checkpoints >= 100 {
        100
    } else {
        n_checkpoints.div_ceil(4).max(1).min(n_checkpoints)
    }
}

/// Mean of the last `window` values (default window from [`final_window_len`]).
pub fn final_window_mean(values: &[f64], window: Option<usize>) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("no checkpoints to average"));
    }
    let w = window.unwrap_or_else(|| final_window_len(values.len()));
    if w == 0 || w > values.len() {
        return Err(Error::invalid(format!(
            "window {w} outside 1..={}",
            values.len()
        )));
    }
    let tail = &values[values.len() - w..];
    Ok(tail.iter().sum::<f64>() / w as f64)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Evaluation rewards of one (trial, condition) run, in checkpoint order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScores {
    pub env: EnvKind,
    pub condition: Condition,
    pub trial: u64,
    pub rewards: Vec<f64>,
}

impl From<&TrainRecord> for RunScores {
    fn from(r: &TrainRecord) -> Self {
        Self {
            env: r.env,
            condition: r.condition,
            trial: r.trial,
            rewards: r.eval_rewards(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub condition: Condition,
    pub mean: f64,
    pub std: f64,
    /// Final-window reward of each trial, in trial order.
    pub per_trial: Vec<f64>,
}

impl SummaryRow {
    pub fn cell(&self) -> String {
        format!("{:.2} ({:.2})", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub env: EnvKind,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn row(&self, condition: Condition) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.condition == condition)
    }

    /// Markdown table: one row per condition, one column for the environment.
    pub fn render(&self) -> String {
        let header = format!("| Method | {} |", self.env.name());
        let width = self
            .rows
            .iter()
            .map(|r| r.condition.label().len())
            .max()
            .unwrap_or(6)
            .max(6);
        let mut out = String::new();
        out.push_str(&header);
        out.push('\n');
        out.push_str("|---|---|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {:width$} | {} |\n",
                r.condition.label(),
                r.cell()
            ));
        }
        out
    }
}

/// Per-condition final-window reward statistics across trials.
pub fn summarize(
    runs: &[RunScores],
    conditions: &[Condition],
    window: Option<usize>,
) -> Result<SummaryTable> {
    let env = runs
        .first()
        .ok_or_else(|| Error::invalid("no runs to summarize"))?
        .env;
    if runs.iter().any(|r| r.env != env) {
        return Err(Error::invalid("runs span more than one environment"));
    }
    let mut rows = Vec::with_capacity(conditions.len());
    for &condition in conditions {
        let mut trials: Vec<&RunScores> = runs.iter().filter(|r| r.condition == condition).collect();
        if trials.is_empty() {
            return Err(Error::invalid(format!("no runs for condition {condition}")));
        }
        trials.sort_by_key(|r| r.trial);
        let per_trial = trials
            .iter()
            .map(|r| final_window_mean(&r.rewards, window))
            .collect::<Result<Vec<_>>>()?;
        let (mean, std) = mean_std(&per_trial);
        rows.push(SummaryRow {
            condition,
            mean,
            std,
            per_trial,
        });
    }
    Ok(SummaryTable { env, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_lengths() {
        assert_eq!(final_window_len(1), 1);
        assert_eq!(final_window_len(4), 1);
        assert_eq!(final_window_len(5), 2);
        assert_eq!(final_window_len(150), 100);
    }

    #[test]
    fn window_mean_uses_tail() {
        let v = [0.0, 0.0, 0.0, 4.0];
        assert_eq!(final_window_mean(&v, None).unwrap(), 4.0);
        assert_eq!(final_window_mean(&v, Some(2)).unwrap(), 2.0);
        assert!(final_window_mean(&v, Some(5)).is_err());
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    fn run(trial: u64, rewards: Vec<f64>) -> RunScores {
        RunScores {
            env: EnvKind::Waypoint,
            condition: Condition::Cmz,
            trial,
            rewards,
        }
    }

    #[test]
    fn table_cells() {
        let t = summarize(&[run(0, vec![5.0; 8])], &[Condition::Cmz], None).unwrap();
        assert_eq!(t.rows[0].cell(), "5.00 (0.00)");
        let t = summarize(&[run(1, vec![3.0]), run(0, vec![1.0])], &[Condition::Cmz], None).unwrap();
        assert_eq!(t.rows[0].mean, 2.0);
        assert!((t.rows[0].std - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(t.rows[0].cell(), "2.00 (1.41)");
        assert!(summarize(&[run(0, vec![1.0])], &[Condition::Bc], None).is_err());
    }
}
