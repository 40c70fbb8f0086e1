use cmz_core::envs::{EnvKind, UniformRandom};
use cmz_core::imitation::{Ensemble, EnsembleManifest};
use cmz_core::nn::{GaussianPolicy, Parameters};
use cmz_core::ppo::{
    collect_rollouts, gae_from_values, normalize_advantages, ppo_update, PpoConfig, RolloutStats,
    Trajectory, ValueNet,
};
use cmz_core::reward::{RewardShaper, ShaperConfig, ShaperMode};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shaper(mode: ShaperMode) -> RewardShaper {
    RewardShaper::new(&ShaperConfig {
        mode,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn gae_three_steps_by_hand() {
    let (g, l) = (0.9, 0.8);
    let r = [1.0, -0.5, 2.0];
    let v = [0.3, 0.1, -0.2];
    let boot = 0.7;
    let d2 = r[2] + g * boot - v[2];
    let d1 = r[1] + g * v[2] - v[1];
    let d0 = r[0] + g * v[1] - v[0];
    let a2 = d2;
    let a1 = d1 + g * l * a2;
    let a0 = d0 + g * l * a1;
    let (adv, ret) = gae_from_values(&r, &v, &[false; 3], boot, g, l);
    for (got, want) in adv.iter().zip([a0, a1, a2]) {
        assert!((got - want).abs() < 1e-12);
    }
    for i in 0..3 {
        assert!((ret[i] - (adv[i] + v[i])).abs() < 1e-12);
    }
}

#[test]
fn gae_lambda_zero_is_td_error() {
    let r = [0.5, 1.0, -1.0, 0.2];
    let v = [0.1, 0.4, -0.3, 0.9];
    let dones = [false, true, false, false];
    let (adv, _) = gae_from_values(&r, &v, &dones, 0.25, 0.99, 0.0);
    let next = [v[1], 0.0, v[3], 0.25];
    for t in 0..4 {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        assert!((adv[t] - (r[t] + 0.99 * next[t] * not_done - v[t])).abs() < 1e-12);
    }
}

#[test]
fn gae_undiscounted_is_return_to_go() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let n = rng.gen_range(1..40);
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut dones = vec![false; n];
        dones[n - 1] = true;
        let (adv, _) = gae_from_values(&r, &vec![0.0; n], &dones, 0.0, 1.0, 1.0);
        for t in 0..n {
            let togo: f64 = r[t..].iter().sum();
            assert!((adv[t] - togo).abs() < 1e-9);
        }
    }
    let (adv, ret) = gae_from_values(&[0.0; 5], &[0.0; 5], &[false; 5], 0.0, 0.99, 0.95);
    assert!(adv.iter().chain(&ret).all(|&x| x == 0.0));
}

#[test]
fn advantage_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut a: Vec<f64> = (0..500).map(|_| rng.gen_range(-3.0..7.0)).collect();
    normalize_advantages(&mut a);
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
    assert!(mean.abs() < 1e-9);
    assert!((std - 1.0).abs() < 1e-6);

    let mut flat = vec![2.0; 10];
    normalize_advantages(&mut flat);
    assert!(flat.iter().all(|&x| x == 0.0));
}

fn single_state_batch(policy: &GaussianPolicy, action: f64, advantage_sign: f64) -> Vec<Trajectory> {
    let obs = vec![0.5, -0.5];
    let below = policy.forward(&obs).unwrap()[0] - 1.0;
    (0..64)
        .map(|i| {
            // Alternate `action` with a contrasting one so normalized advantages keep their sign.
            let (a, r) = if i % 2 == 0 { (action, advantage_sign) } else { (below, -advantage_sign) };
            Trajectory {
                obs_dim: 2,
                act_dim: 1,
                observations: obs.clone(),
                actions: vec![a],
                shaped_rewards: vec![r],
                true_rewards: vec![0.0],
                log_probs: vec![policy.log_prob(&obs, &[a]).unwrap()],
                values: vec![0.0],
                dones: vec![true],
                disagreement: vec![0.0],
                final_obs: obs.clone(),
            }
        })
        .collect()
}

#[test]
fn positive_advantage_pulls_mean_toward_action() {
    let mut policy = GaussianPolicy::new(2, 1, 1);
    let mut value = ValueNet::new(2, 2);
    let mu0 = policy.forward(&[0.5, -0.5]).unwrap()[0];
    let batch = single_state_batch(&policy, mu0 + 0.5, 1.0);
    let cfg = PpoConfig {
        epochs: 1,
        ..Default::default()
    };
    let diag = ppo_update(&mut policy, &mut value, &batch, &cfg, 3).unwrap();
    let mu1 = policy.forward(&[0.5, -0.5]).unwrap()[0];
    assert!(mu1 > mu0, "{mu0} -> {mu1}");
    assert!((0.0..=1.0).contains(&diag.clip_fraction));
    assert!(diag.approx_kl >= -1e-6);
}

#[test]
fn zero_advantages_leave_policy_unchanged() {
    let mut policy = GaussianPolicy::new(2, 1, 4);
    let mut value = ValueNet::new(2, 5);
    let mut batch = single_state_batch(&policy, 0.3, 1.0);
    // Constant rewards with zero values and terminal steps give constant advantages,
    // which normalize to exactly zero.
    batch.iter_mut().for_each(|t| t.shaped_rewards[0] = 1.0);
    let before = policy.flat_values();
    ppo_update(&mut policy, &mut value, &batch, &PpoConfig::default(), 6).unwrap();
    for (a, b) in before.iter().zip(policy.flat_values()) {
        assert!((a - b).abs() < 1e-12);
    }
}

fn identical_ensemble(obs_dim: usize, act_dim: usize) -> Ensemble {
    let m = GaussianPolicy::new(obs_dim, act_dim, 77);
    Ensemble::from_members(
        vec![m.clone(), m.clone(), m],
        EnsembleManifest {
            k: 3,
            init_seeds: vec![77; 3],
            resamples: vec![vec![0]; 3],
        },
    )
    .unwrap()
}

#[test]
fn rollouts_log_exact_step_count_and_rewards() {
    let kind = EnvKind::Waypoint;
    let env = kind.make();
    let (o, a) = (env.obs_dim(), env.act_dim());
    let policy = GaussianPolicy::new(o, a, 10);
    let value = ValueNet::new(o, 11);
    let factory = move || kind.make();

    let mut zero = shaper(ShaperMode::Zero);
    let batch = collect_rollouts(&factory, &policy, &value, &mut zero, None, 2048, 12).unwrap();
    let stats = RolloutStats::from_batch(&batch);
    assert_eq!(stats.steps, 2048);
    assert_eq!(batch.iter().map(|t| t.len()).sum::<usize>(), 2048);
    assert!(batch.len() > 1, "episodes auto-reset mid-collection");
    assert!(batch.iter().flat_map(|t| &t.shaped_rewards).all(|&r| r == 0.0));
    assert!(batch.iter().flat_map(|t| &t.true_rewards).any(|&r| r != 0.0));

    let ens = identical_ensemble(o, a);
    let mut cmz = shaper(ShaperMode::Cmz);
    let batch = collect_rollouts(&factory, &policy, &value, &mut cmz, Some(&ens), 300, 13).unwrap();
    assert!(batch.iter().flat_map(|t| &t.shaped_rewards).all(|&r| r == 0.0));

    let mut again = shaper(ShaperMode::Cmz);
    let replay = collect_rollouts(&factory, &policy, &value, &mut again, Some(&ens), 300, 13).unwrap();
    assert_eq!(batch, replay);
}

#[test]
fn disagreement_modes_need_an_ensemble() {
    let kind = EnvKind::Pendulum;
    let policy = GaussianPolicy::new(3, 1, 1);
    let value = ValueNet::new(3, 2);
    let mut cmz = shaper(ShaperMode::Cmz);
    assert!(collect_rollouts(&move || kind.make(), &policy, &value, &mut cmz, None, 10, 0).is_err());
}

#[test]
fn updates_are_deterministic() {
    let kind = EnvKind::Pendulum;
    let run = || {
        let mut policy = GaussianPolicy::new(3, 1, 21);
        let mut value = ValueNet::new(3, 22);
        let mut s = shaper(ShaperMode::TrueEnv);
        let batch = collect_rollouts(&move || kind.make(), &policy, &value, &mut s, None, 512, 23).unwrap();
        let d = ppo_update(&mut policy, &mut value, &batch, &PpoConfig::default(), 24).unwrap();
        (d, policy)
    };
    assert_eq!(run(), run());
}

#[test]
fn random_actor_is_usable_as_baseline() {
    // Smoke check that the random actor runs through the public API.
    let mut env = EnvKind::Pendulum.make();
    let mut actor = UniformRandom(cmz_core::seed::rng(1));
    let ep = cmz_core::envs::record_episode(env.as_mut(), &mut actor, 3).unwrap();
    assert_eq!(ep.len(), 200);
}
