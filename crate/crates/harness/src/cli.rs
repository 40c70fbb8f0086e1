use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cmz_core::envs::EnvKind;
use cmz_core::nn::checkpoint;
use cmz_core::summary::final_window_mean;
use cmz_core::trainer::{evaluate, trial_data, Condition};

use crate::config::{ExperimentConfig, Overrides, ENV_PREFIX};
use crate::{plot, run};

#[derive(Debug, Parser)]
#[command(
    name = "cmzdril",
    version,
    about = "Imitation learning with continuous mean-zero disagreement rewards",
    after_help = "Any config key can also be set through the environment: \
                  CMZ_<KEY>, with nested keys joined by `__` (e.g. CMZ_TRAIN__TOTAL_UPDATES=50). \
                  Precedence: config file < environment < flags."
)]
pub struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_env)]
    env: Option<EnvKind>,
    /// Comma-separated list, e.g. `bc,cmz,dril,penalty,zero,true_env`.
    #[arg(long, global = true, value_delimiter = ',')]
    conditions: Option<Vec<Condition>>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record expert demonstrations (training and held-out sets) for each trial.
    DemoCollect {
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Train one condition of one trial.
    Train {
        #[arg(long)]
        condition: Condition,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Every condition on every trial, then the summary table.
    Suite,
    /// Score a policy checkpoint on a trial's held-out expert seeds.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Render metrics CSV files to one SVG (one panel per metric).
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn parse_env(s: &str) -> Result<EnvKind, String> {
    match s {
        "waypoint" => Ok(EnvKind::Waypoint),
        "pendulum" => Ok(EnvKind::Pendulum),
        _ => Err(format!("unknown environment `{s}` (expected waypoint or pendulum)")),
    }
}

/// Parse `args` (including the program name) and execute the subcommand.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        if e.use_stderr() {
            anyhow::Error::msg(e.to_string())
        } else {
            // --help and --version
            let _ = e.print();
            std::process::exit(0)
        }
    })?;
    let g = &cli.global;
    let overrides = Overrides {
        env: g.env,
        conditions: g.conditions.clone(),
        trials: g.trials,
        seed: g.seed,
        out: g.out.clone(),
        workers: g.workers,
    };
    let vars = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX));
    let mut cfg = ExperimentConfig::resolve(g.config.as_deref(), vars, &overrides)?;

    match cli.command {
        Command::DemoCollect { episodes } => {
            if let Some(n) = episodes {
                cfg.train.demo_episodes = n;
            }
            cfg.validate()?;
            let dir = run::env_dir(&cfg).join("demos");
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
            for trial in 0..cfg.trials as u64 {
                let data = trial_data(&cfg.run_config(trial))?;
                let train = dir.join(format!("trial_{trial}_train.cmzd"));
                let eval = dir.join(format!("trial_{trial}_eval.cmzd"));
                data.train.save(&train)?;
                data.eval.save(&eval)?;
                println!("{} ({} pairs)", train.display(), data.train.num_pairs());
                println!("{} ({} pairs)", eval.display(), data.eval.num_pairs());
            }
        }
        Command::Train { condition, trial } => {
            let (data, pre) = run::prepare_trial(&cfg, trial)?;
            let scores = run::run_one(&cfg, trial, condition, &data, &pre)?;
            let tail = final_window_mean(&scores.rewards, None)?;
            println!(
                "{}: final-window reward {tail:.2} ({})",
                condition.label(),
                run::run_dir(&cfg, trial, condition).display()
            );
        }
        Command::Suite => {
            let table = run::run_suite(&cfg)?;
            print!("{}", run::summary_text(&cfg, &table));
        }
        Command::Eval { checkpoint: path, trial } => {
            let policy = checkpoint::load_policy(&path)
                .with_context(|| format!("loading {}", path.display()))?;
            let data = trial_data(&cfg.run_config(trial))?;
            if policy.obs_dim() != data.eval.obs_dim || policy.act_dim() != data.eval.act_dim {
                bail!("checkpoint does not match the {} environment", cfg.train.env.name());
            }
            let row = evaluate(&policy, cfg.train.env, &data.eval, 0)?;
            println!("reward {:.4}", row.reward);
            println!("frechet {:.4}", row.frechet);
            println!("mse {:.6}", row.mse);
        }
        Command::Plot { csv, output } => {
            let sets = csv
                .iter()
                .map(|p| {
                    let label = p
                        .parent()
                        .and_then(|d| d.file_name())
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| p.display().to_string());
                    plot::panels_from_csv(p, &label)
                })
                .collect::<Result<Vec<_>>>()?;
            let panels = if sets.len() == 1 {
                sets.into_iter().next().expect("one set")
            } else {
                plot::overlay(sets)
            };
            let output = output.unwrap_or_else(|| csv[0].with_extension("svg"));
            fs::write(&output, plot::render(&panels))?;
            println!("{}", output.display());
        }
    }
    Ok(())
}
