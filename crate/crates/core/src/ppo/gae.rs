use super::{Trajectory, ValueNet};

/// Generalized advantage estimates and return targets for one trajectory.
///
/// `δ_t = r_t + γ·V(s_{t+1})·(1 − done_t) − V(s_t)`,
/// `A_t = δ_t + γλ·(1 − done_t)·A_{t+1}`, `returns = A + V`. The value past the
/// last step is 0 if it ended the episode, otherwise `value_net(final_obs)`.
pub fn compute_gae(
    traj: &Trajectory,
    value_net: &ValueNet,
    gamma: f64,
    gae_lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let bootstrap = if traj.ends_episode() {
        0.0
    } else {
        value_net.value(&traj.final_obs)
    };
    gae_from_values(&traj.shaped_rewards, &traj.values, &traj.dones, bootstrap, gamma, gae_lambda)
}

pub fn gae_from_values(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    gae_lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let not_done = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        next_adv = delta + gamma * gae_lambda * not_done * next_adv;
        adv[t] = next_adv;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shift and scale to zero mean, unit population variance; only shift when the
/// variance is below `1e-12`.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = if var < 1e-12 { 1.0 } else { var.sqrt() };
    for a in adv.iter_mut() {
        *a = (*a - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lambda_is_one_step_td() {
        let r = [1.0, -0.5, 2.0];
        let v = [0.3, 0.1, -0.2];
        let d = [false, false, false];
        let (adv, _) = gae_from_values(&r, &v, &d, 0.7, 0.9, 0.0);
        assert_eq!(adv[0], 1.0 + 0.9 * 0.1 - 0.3);
        assert_eq!(adv[1], -0.5 + 0.9 * -0.2 - 0.1);
        assert_eq!(adv[2], 2.0 + 0.9 * 0.7 + 0.2);
    }

    #[test]
    fn zero_rewards_zero_values() {
        let (adv, ret) = gae_from_values(&[0.0; 5], &[0.0; 5], &[false; 5], 0.0, 0.99, 0.95);
        assert!(adv.iter().chain(&ret).all(|&x| x == 0.0));
    }

    #[test]
    fn three_step_hand_unrolled() {
        let (g, l) = (0.9, 0.8);
        let r = [1.0, 2.0, 3.0];
        let v = [0.5, -1.0, 2.0];
        let d = [false, false, true];
        let d2 = 3.0 - 2.0;
        let d1 = 2.0 + g * 2.0 - -1.0;
        let d0 = 1.0 + g * -1.0 - 0.5;
        let a2 = d2;
        let a1 = d1 + g * l * a2;
        let a0 = d0 + g * l * a1;
        let (adv, ret) = gae_from_values(&r, &v, &d, 99.0, g, l);
        for (x, y) in adv.iter().zip([a0, a1, a2]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((ret[0] - (a0 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn normalization_moments() {
        let mut a = vec![3.0, -1.0, 4.0, 1.0, -5.0, 9.0];
        normalize_advantages(&mut a);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((std - 1.0).abs() < 1e-6);
        let mut flat = vec![2.0; 4];
        normalize_advantages(&mut flat);
        assert_eq!(flat, vec![0.0; 4]);
    }
}
