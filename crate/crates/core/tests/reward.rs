use cmz_core::envs::EnvStep;
use cmz_core::reward::{quantile, RewardShaper, ShaperConfig, ShaperMode};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cmz() -> RewardShaper {
    RewardShaper::new(&ShaperConfig::default()).unwrap()
}

fn step(reward: f64) -> EnvStep {
    EnvStep {
        observation: vec![0.0],
        reward,
        done: false,
        step: 1,
    }
}

#[test]
fn mean_reward_telescopes_to_final_average() {
    // Σ(u_i − ū_i) = (ū_T − ū_0)/(1 − γ), so mean r = −α·ū_T/((1 − γ)·T).
    let mut passes = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = cmz();
        let n = 10_000;
        let total: f64 = (0..n).map(|_| s.cmz_reward(rng.gen_range(0.0..1.0)).unwrap()).sum();
        let mean = total / n as f64;
        let predicted = -10.0 * s.u_bar() / (0.01 * n as f64);
        assert!((mean - predicted).abs() < 1e-9, "seed {seed}: {mean} vs {predicted}");
        assert!(mean.abs() < 0.06, "seed {seed}: mean {mean}");
        passes += (mean.abs() < 0.05) as usize;
    }
    eprintln!("{passes}/20 seeds below 0.05");
}

#[test]
fn constant_disagreement_geometric_sum() {
    let (alpha, gamma, c, t): (f64, f64, f64, i32) = (10.0, 0.99, 0.3, 1000);
    let mut s = cmz();
    let mut sum = 0.0;
    for i in 0..t {
        let r = s.cmz_reward(c).unwrap();
        assert!((r - (-alpha * c * gamma.powi(i))).abs() < 1e-12);
        sum += r;
    }
    let closed = -alpha * c * (1.0 - gamma.powi(t)) / (1.0 - gamma);
    assert!((sum - closed).abs() < 1e-9);
    // The sum converges, so the per-step mean decays like 1/T.
    let mut s = cmz();
    let long: f64 = (0..100_000).map(|_| s.cmz_reward(c).unwrap()).sum();
    assert!((long / 100_000.0).abs() < (sum / t as f64).abs() / 50.0);
}

#[test]
fn reward_then_update_order() {
    let us = [0.2, 0.5, 0.1, 0.7];
    let mut s = cmz();
    let mut post = cmz();
    let mut differ = false;
    for &u in &us {
        let r = s.cmz_reward(u).unwrap();
        // Shaping against the updated average instead gives different numbers.
        let bar = 0.99 * post.u_bar() + 0.01 * u;
        let wrong = -10.0 * (u - bar);
        post.cmz_reward(u).unwrap();
        differ |= (r - wrong).abs() > 1e-9;
    }
    assert!(differ);
}

#[test]
fn shape_replays_cmz_sequence() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let us: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..0.5)).collect();
    let mut a = cmz();
    let mut b = cmz();
    for &u in &us {
        assert_eq!(a.shape(&step(3.0), u).unwrap(), b.cmz_reward(u).unwrap());
    }
}

#[test]
fn episode_reset_isolates_episodes() {
    let mut s = cmz();
    for _ in 0..50 {
        s.cmz_reward(0.4).unwrap();
    }
    s.reset_episode();
    assert_eq!(s.u_bar(), 0.0);
    assert!((s.cmz_reward(0.2).unwrap() + 2.0).abs() < 1e-12);

    let mut carry = RewardShaper::new(&ShaperConfig {
        reset_per_episode: false,
        ..ShaperConfig::default()
    })
    .unwrap();
    carry.cmz_reward(0.4).unwrap();
    carry.reset_episode();
    assert!(carry.u_bar() > 0.0);
}

#[test]
fn pass_through_modes() {
    let zero = ShaperConfig {
        mode: ShaperMode::Zero,
        ..Default::default()
    };
    let env = ShaperConfig {
        mode: ShaperMode::TrueEnv,
        ..Default::default()
    };
    assert_eq!(RewardShaper::new(&zero).unwrap().shape(&step(5.0), 0.3).unwrap(), 0.0);
    assert_eq!(RewardShaper::new(&env).unwrap().shape(&step(-0.01), 0.3).unwrap(), -0.01);
}

#[test]
fn interpolated_median() {
    assert!((quantile(&[0.4, 0.1, 0.3, 0.2], 0.5).unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(quantile(&[0.4, 0.1, 0.3], 1.0).unwrap(), 0.4);
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn cmz_is_affine_in_u(bar_steps in prop::collection::vec(0.0f64..1.0, 0..20), u in 0.0f64..2.0, v in 0.0f64..2.0) {
        let mut a = cmz();
        for &x in &bar_steps { a.cmz_reward(x).unwrap(); }
        let mut b = a.clone();
        let ra = a.cmz_reward(u).unwrap();
        let rb = b.cmz_reward(v).unwrap();
        prop_assert!(((ra - rb).abs() - 10.0 * (u - v).abs()).abs() < 1e-9);
    }

    #[test]
    fn penalty_never_positive(us in prop::collection::vec(0.0f64..3.0, 1..50)) {
        let s = RewardShaper::new(&ShaperConfig { mode: ShaperMode::Penalty, ..Default::default() }).unwrap();
        let total: f64 = us.iter().map(|&u| s.penalty_reward(u).unwrap()).sum();
        prop_assert!(total <= 0.0);
        if us.iter().any(|&u| u > 0.0) { prop_assert!(total < 0.0); }
    }

    #[test]
    fn ubar_stays_nonnegative(us in prop::collection::vec(0.0f64..5.0, 1..100)) {
        let mut s = cmz();
        for &u in &us {
            s.cmz_reward(u).unwrap();
            prop_assert!(s.u_bar() >= 0.0);
        }
    }
}
