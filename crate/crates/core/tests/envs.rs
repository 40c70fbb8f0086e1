use cmz_core::envs::{
    collect_demos, record_episode, Actor, Env, EnvKind, Expert, Obstacle, UniformRandom,
    WaypointConfig, WaypointWorld,
};
use cmz_core::seed;

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn mean_return(kind: EnvKind, actor: &mut dyn Actor, episodes: u64) -> f64 {
    let mut env = kind.make();
    (0..episodes)
        .map(|i| record_episode(env.as_mut(), actor, 1000 + i).unwrap().total_reward())
        .sum::<f64>()
        / episodes as f64
}

/// `candidate` improves on `baseline` by `factor`: for negative baselines the
/// cost shrinks by `factor`, for positive baselines the reward grows by it.
fn improves_by(candidate: f64, baseline: f64, factor: f64) -> bool {
    if baseline < 0.0 {
        candidate >= baseline / factor
    } else {
        candidate >= baseline * factor
    }
}

#[test]
fn reset_is_deterministic() {
    for kind in [EnvKind::Waypoint, EnvKind::Pendulum] {
        let mut a = kind.make();
        let mut b = kind.make();
        assert_eq!(a.reset(17).unwrap(), b.reset(17).unwrap());
        assert_ne!(a.reset(17).unwrap(), b.reset(18).unwrap());
    }
}

#[test]
fn spawned_agent_and_goal_are_never_inside_obstacles() {
    let mut w = WaypointWorld::new(WaypointConfig::default());
    for s in 0..1000 {
        w.reset(s).unwrap();
        for o in w.obstacles() {
            assert!(dist(w.position(), o.center) > o.radius, "seed {s}: agent inside obstacle");
            assert!(dist(w.goal(), o.center) > o.radius, "seed {s}: goal inside obstacle");
        }
        assert_eq!(w.obstacles().len(), 8);
    }
}

#[test]
fn lidar_matches_brute_force_ray_march() {
    let mut w = WaypointWorld::new(WaypointConfig::default());
    for s in 0..50 {
        w.reset(s).unwrap();
        let lidar = w.lidar();
        let p = w.position();
        for (b, &reading) in lidar.iter().enumerate() {
            let angle = w.heading() + std::f64::consts::TAU * b as f64 / 16.0;
            let dir = [angle.cos(), angle.sin()];
            // closed form per circle, solved independently as a quadratic in t
            let mut best = 10.0_f64;
            for o in w.obstacles() {
                let (fx, fy) = (p[0] - o.center[0], p[1] - o.center[1]);
                let bq = 2.0 * (fx * dir[0] + fy * dir[1]);
                let cq = fx * fx + fy * fy - o.radius * o.radius;
                let disc = bq * bq - 4.0 * cq;
                if disc >= 0.0 {
                    let t = (-bq - disc.sqrt()) / 2.0;
                    if t >= 0.0 {
                        best = best.min(t);
                    }
                }
            }
            assert!((reading - best).abs() < 1e-9, "seed {s} beam {b}");
            assert!((0.0..=10.0).contains(&reading));
        }
    }
}

#[test]
fn lidar_reading_for_circle_five_ahead() {
    let mut w = WaypointWorld::new(WaypointConfig { n_obstacles: 0, ..Default::default() });
    w.set_state([3.0, 3.0], 0.7, [18.0, 18.0], vec![Obstacle {
        center: [3.0 + 5.0 * 0.7f64.cos(), 3.0 + 5.0 * 0.7f64.sin()],
        radius: 1.0,
    }]);
    assert!((w.lidar()[0] - 4.0).abs() < 1e-9);
}

#[test]
fn same_seed_and_actions_replay_identically() {
    for kind in [EnvKind::Waypoint, EnvKind::Pendulum] {
        let mut env = kind.make();
        let demos = collect_demos(env.as_mut(), &mut Expert, 3, 5).unwrap();
        for ep in &demos.episodes {
            let mut replay = kind.make();
            let mut obs = replay.reset(ep.seed).unwrap();
            for (i, a) in ep.actions.chunks_exact(demos.act_dim).enumerate() {
                assert_eq!(obs, &ep.observations[i * demos.obs_dim..(i + 1) * demos.obs_dim]);
                let s = replay.step(a).unwrap();
                assert_eq!(s.reward.to_bits(), ep.rewards[i].to_bits());
                obs = s.observation;
            }
            assert!(replay.is_done());
        }
    }
}

#[test]
fn every_episode_respects_horizon() {
    for kind in [EnvKind::Waypoint, EnvKind::Pendulum] {
        let mut env = kind.make();
        let horizon = env.horizon();
        let mut random = UniformRandom(seed::rng(2));
        for s in 0..20 {
            let ep = record_episode(env.as_mut(), &mut random, s).unwrap();
            assert!(ep.len() <= horizon);
        }
    }
}

#[test]
fn five_waypoint_demos_have_a_few_hundred_pairs() {
    let mut env = EnvKind::Waypoint.make();
    for s in 0..10 {
        let demos = collect_demos(env.as_mut(), &mut Expert, 5, s).unwrap();
        let n = demos.num_pairs();
        assert!((150..=600).contains(&n), "seed {s}: {n} pairs");
    }
}

#[test]
fn waypoint_expert_reaches_goal_reliably() {
    let mut env = WaypointWorld::new(WaypointConfig::default());
    let cfg = env.config().clone();
    let mut successes = 0;
    for s in 0..100 {
        record_episode(&mut env, &mut Expert, s).unwrap();
        if dist(env.position(), env.goal()) <= cfg.goal_radius + cfg.max_speed {
            successes += 1;
        }
    }
    println!("expert success: {successes}/100");
    assert!(successes >= 95);
}

#[test]
fn experts_beat_random_by_five_times() {
    for kind in [EnvKind::Waypoint, EnvKind::Pendulum] {
        let expert = mean_return(kind, &mut Expert, 100);
        let random = mean_return(kind, &mut UniformRandom(seed::rng(9)), 100);
        println!("{kind}: expert {expert:.2}, random {random:.2}");
        assert!(improves_by(expert, random, 5.0), "{kind}: expert {expert}, random {random}");
    }
}
