use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use cmz_harness::cli;

const TINY: &str = r#"
trials = 1
plots = true

[train]
demo_episodes = 2
ensemble_k = 2
total_updates = 2
eval_episodes = 2
seed = 5

[train.bc]
epochs = 20

[train.ppo]
rollout_steps = 128
epochs = 2
"#;

fn tiny_config(dir: &Path) -> PathBuf {
    let p = dir.join("tiny.toml");
    fs::write(&p, TINY).unwrap();
    p
}

fn run(args: &[&str]) -> anyhow::Result<()> {
    cli::run(std::iter::once("cmzdril").chain(args.iter().copied()))
}

fn table_rows(summary: &str) -> Vec<&str> {
    summary
        .lines()
        .filter(|l| l.starts_with('|') && !l.starts_with("|---") && !l.starts_with("| Method"))
        .collect()
}

#[test]
fn suite_with_two_conditions_writes_two_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("runs");
    let args = [
        "suite",
        "--config",
        cfg.to_str().unwrap(),
        "--conditions",
        "bc,cmz",
        "--trials",
        "1",
        "--env",
        "waypoint",
        "--out",
        out.to_str().unwrap(),
    ];
    run(&args).unwrap();
    let env_dir = out.join("waypoint");
    let summary = fs::read_to_string(env_dir.join("summary.md")).unwrap();
    let rows = table_rows(&summary);
    assert_eq!(rows.len(), 2, "{summary}");
    let method = |row: &str| row.split('|').nth(1).unwrap().trim().to_string();
    assert_eq!(method(rows[0]), "Behavioral Cloning");
    assert_eq!(method(rows[1]), "CMZ-DRIL");

    let trial = env_dir.join("trial_0");
    for c in ["bc", "cmz"] {
        for f in ["config.toml", "policy.ckpt", "metrics.csv", "diagnostics.csv", "record.json", "metrics.svg"] {
            assert!(trial.join(c).join(f).is_file(), "{c}/{f}");
        }
    }
    assert!(trial.join("comparison.svg").is_file());
    // Every condition of a trial sees the same demonstrations.
    for f in ["demos_train.cmzd", "demos_eval.cmzd"] {
        assert_eq!(fs::read(trial.join("bc").join(f)).unwrap(), fs::read(trial.join("cmz").join(f)).unwrap());
    }

    // A finished run is picked up again rather than retrained.
    let record = trial.join("cmz").join("record.json");
    let stamp = fs::metadata(&record).unwrap().modified().unwrap();
    run(&args).unwrap();
    assert_eq!(fs::metadata(&record).unwrap().modified().unwrap(), stamp);
    assert_eq!(fs::read_to_string(env_dir.join("summary.md")).unwrap(), summary);
}

#[test]
fn same_config_gives_identical_summary_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        run(&[
            "suite",
            "--config",
            cfg.to_str().unwrap(),
            "--conditions",
            "zero,dril",
            "--out",
            out.to_str().unwrap(),
        ])
        .unwrap();
        let dir = out.join("waypoint");
        outputs.push((
            fs::read(dir.join("summary.md")).unwrap(),
            fs::read(dir.join("summary.json")).unwrap(),
            fs::read(dir.join("trial_0/dril/metrics.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn demo_collect_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        run(&[
            "demo-collect",
            "--episodes",
            "5",
            "--env",
            "waypoint",
            "--seed",
            "7",
            "--trials",
            "1",
            "--out",
            out.to_str().unwrap(),
        ])
        .unwrap();
        files.push(fs::read(out.join("waypoint/demos/trial_0_train.cmzd")).unwrap());
    }
    assert!(!files[0].is_empty());
    assert_eq!(files[0], files[1]);
}

#[test]
fn plot_of_single_row_csv_is_valid_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("metrics.csv");
    fs::write(
        &csv,
        "epoch,reward_raw,reward_smooth,frechet_raw,frechet_smooth,mse_raw,mse_smooth\n1,2.5,2.5,3.0,3.0,0.1,0.1\n",
    )
    .unwrap();
    let svg = tmp.path().join("out.svg");
    run(&["plot", csv.to_str().unwrap(), "--output", svg.to_str().unwrap()]).unwrap();
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    assert!(!text.contains("NaN"));
    assert_eq!(text.matches("<circle").count(), 6, "raw and smoothed point per panel");
}

#[test]
fn train_then_eval_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("runs");
    let common = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let mut args = vec!["train", "--condition", "zero"];
    args.extend(common);
    run(&args).unwrap();
    let ckpt = out.join("waypoint/trial_0/zero/policy.ckpt");
    let mut args = vec!["eval", "--checkpoint", ckpt.to_str().unwrap()];
    args.extend(common);
    run(&args).unwrap();
}

#[test]
fn invalid_config_exits_nonzero_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "trials = 1\nbogus_key = 3\n").unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_cmzdril"))
        .args(["suite", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.starts_with("error:") && err.contains("bogus_key"), "{err}");

    let output = Command::new(env!("CARGO_BIN_EXE_cmzdril"))
        .args(["suite", "--trials", "0"])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn env_var_overrides_reach_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out = tmp.path().join("runs");
    let status = Command::new(env!("CARGO_BIN_EXE_cmzdril"))
        .args(["demo-collect", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("CMZ_TRAIN__DEMO_EPISODES", "3")
        .status()
        .unwrap();
    assert!(status.success());
    let snapshot = fs::read_to_string(out.join("waypoint/demos/config.toml")).unwrap();
    assert!(snapshot.contains("demo_episodes = 3"), "{snapshot}");
}
