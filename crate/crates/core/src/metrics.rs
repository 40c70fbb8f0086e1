//! Evaluation metrics: discrete Fréchet distance, action MSE, seed-paired
//! rollouts against expert traces, and Gaussian smoothing of epoch series.

use crate::envs::{episode_seeds, record_episode, Actor, DemoSet, Env};
use crate::nn::GaussianPolicy;
use crate::{Error, Result};

/// Ordered sequence of equal-dimension points.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTrace {
    dim: usize,
    coords: Vec<f64>,
}

impl PathTrace {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::invalid("a trace needs at least one point of positive dimension"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("trace contains non-finite coordinates"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("trace points differ in dimension"));
        }
        Self::new(dim, points.concat())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Discrete Fréchet distance, `O(|a|·|b|)` dynamic program over two rows.
pub fn frechet_distance(a: &PathTrace, b: &PathTrace) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::invalid("traces differ in dimension"));
    }
    let m = b.len();
    let mut prev = vec![0.0_f64; m];
    let mut cur = vec![0.0_f64; m];
    for i in 0..a.len() {
        for j in 0..m {
            let d = euclidean(a.point(i), b.point(j));
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// Mean over pairs and action dimensions of `(μ(o)_d − a_d)²`.
pub fn action_mse(policy: &GaussianPolicy, demos: &DemoSet) -> Result<f64> {
    if demos.obs_dim != policy.obs_dim() || demos.act_dim != policy.act_dim() {
        return Err(Error::invalid("demo and policy dimensions differ"));
    }
    if demos.is_empty() {
        return Err(Error::invalid("demo set is empty"));
    }
    let mut total = 0.0;
    for (o, a) in demos.pairs() {
        let mean = policy.forward(o)?;
        total += mean.iter().zip(a).map(|(m, x)| (m - x) * (m - x)).sum::<f64>();
    }
    Ok(total / (demos.num_pairs() * demos.act_dim) as f64)
}

/// Per-episode outcome of a seed-paired evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeEval {
    pub seed: u64,
    pub total_reward: f64,
    pub frechet: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub episodes: Vec<EpisodeEval>,
}

impl EvalSummary {
    pub fn mean_reward(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.total_reward))
    }

    pub fn mean_frechet(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.frechet))
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    xs.sum::<f64>() / n.max(1) as f64
}

/// Roll `actor` out on every episode seed in `expert_demos`, scoring true
/// reward and the Fréchet distance to the expert's trace on the same seed.
pub fn evaluate_against_expert(
    actor: &mut dyn Actor,
    env: &mut dyn Env,
    expert_demos: &DemoSet,
) -> Result<EvalSummary> {
    if expert_demos.episodes.is_empty() {
        return Err(Error::invalid("no expert evaluation episodes"));
    }
    if expert_demos.env_name != env.name() || expert_demos.trace_dim != env.trace_dim() {
        return Err(Error::config(format!(
            "expert demos were recorded on {:?}, evaluating on {:?}",
            expert_demos.env_name,
            env.name()
        )));
    }
    let dim = expert_demos.trace_dim;
    let mut episodes = Vec::with_capacity(expert_demos.episodes.len());
    for ep in &expert_demos.episodes {
        let run = record_episode(env, actor, ep.seed)?;
        let frechet = frechet_distance(
            &PathTrace::new(dim, run.trace.clone())?,
            &PathTrace::new(dim, ep.trace.clone())?,
        )?;
        episodes.push(EpisodeEval {
            seed: ep.seed,
            total_reward: run.total_reward(),
            frechet,
            steps: run.len(),
        });
    }
    Ok(EvalSummary { episodes })
}

/// Mean Fréchet distance between `actor` and the expert over `n_episodes`
/// evaluation episodes derived from `seed`. The expert demos must have been
/// recorded on exactly those seeds.
pub fn eval_frechet(
    actor: &mut dyn Actor,
    env: &mut dyn Env,
    expert_demos: &DemoSet,
    n_episodes: usize,
    seed: u64,
) -> Result<f64> {
    let expected = episode_seeds(seed, n_episodes);
    let recorded: Vec<u64> = expert_demos.episodes.iter().map(|e| e.seed).collect();
    if expected != recorded {
        return Err(Error::config(
            "expert demos were not recorded on the evaluation seeds",
        ));
    }
    Ok(evaluate_against_expert(actor, env, expert_demos)?.mean_frechet())
}

/// Normalized Gaussian kernel truncated at radius `⌈4σ⌉`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Half-sample symmetric reflection of index `i` into `0..n`.
fn reflect(i: i64, n: i64) -> usize {
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// 1-D Gaussian filter with reflect padding; output has the input's length.
pub fn gaussian_smooth(series: &[f64], sigma: f64) -> Vec<f64> {
    if series.is_empty() || sigma <= 0.0 {
        return series.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as i64;
    let n = series.len() as i64;
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * series[reflect(i + k as i64 - radius, n)])
                .sum()
        })
        .collect()
}
