//! Lidar waypoint navigation in a square world with circular obstacles.
//!
//! Sign convention: heading is measured counter-clockwise from +x, so a
//! positive `heading_rate` action turns the agent left.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{clip_unit, wrap_angle, Env, EnvStep};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaypointConfig {
    pub world_size: f64,
    pub n_beams: usize,
    pub lidar_range: f64,
    /// Distance travelled per step at full throttle.
    pub max_speed: f64,
    /// Heading change per step at full turn command (rad).
    pub max_turn: f64,
    pub n_obstacles: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Minimum edge-to-edge spacing between obstacles.
    pub min_gap: f64,
    /// Minimum spacing between an obstacle edge and the start or goal.
    pub spawn_clearance: f64,
    pub goal_radius: f64,
    pub progress_gain: f64,
    pub time_penalty: f64,
    pub goal_bonus: f64,
    pub collision_penalty: f64,
    pub horizon: usize,
    /// Clearance the expert keeps from obstacle edges.
    pub expert_margin: f64,
    pub max_placement_attempts: usize,
}

impl Default for WaypointConfig {
    fn default() -> Self {
        Self {
            world_size: 20.0,
            n_beams: 16,
            lidar_range: 10.0,
            max_speed: 0.5,
            max_turn: 0.3,
            n_obstacles: 8,
            radius_min: 0.5,
            radius_max: 1.5,
            min_gap: 1.5,
            spawn_clearance: 1.0,
            goal_radius: 0.5,
            progress_gain: 1.0,
            time_penalty: 0.01,
            goal_bonus: 10.0,
            collision_penalty: 10.0,
            horizon: 300,
            expert_margin: 0.6,
            max_placement_attempts: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Distance along a unit-direction ray from `origin` to the first intersection
/// with the circle, `None` if the ray misses. An origin inside the circle hits at 0.
pub fn ray_circle_distance(origin: [f64; 2], dir: [f64; 2], obstacle: &Obstacle) -> Option<f64> {
    let fx = origin[0] - obstacle.center[0];
    let fy = origin[1] - obstacle.center[1];
    let c = fx * fx + fy * fy - obstacle.radius * obstacle.radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = fx * dir[0] + fy * dir[1];
    if b >= 0.0 {
        // pointing away from the center while outside
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    Some(-b - disc.sqrt())
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Distance from `p` to the segment `a`–`b`.
fn segment_point_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(a, p);
    }
    let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    dist([a[0] + t * dx, a[1] + t * dy], p)
}

#[derive(Debug, Clone)]
pub struct WaypointWorld {
    config: WaypointConfig,
    pos: [f64; 2],
    heading: f64,
    speed: f64,
    goal: [f64; 2],
    obstacles: Vec<Obstacle>,
    steps: usize,
    done: bool,
}

impl WaypointWorld {
    pub fn new(config: WaypointConfig) -> Self {
        Self {
            pos: [1.0, config.world_size / 2.0],
            goal: [config.world_size - 1.0, config.world_size / 2.0],
            config,
            heading: 0.0,
            speed: 0.0,
            obstacles: Vec::new(),
            steps: 0,
            done: true,
        }
    }

    pub fn config(&self) -> &WaypointConfig {
        &self.config
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    /// Place the agent, goal and obstacles directly, starting a fresh episode.
    pub fn set_state(&mut self, pos: [f64; 2], heading: f64, goal: [f64; 2], obstacles: Vec<Obstacle>) {
        self.pos = pos;
        self.heading = wrap_angle(heading);
        self.goal = goal;
        self.obstacles = obstacles;
        self.speed = 0.0;
        self.steps = 0;
        self.done = false;
    }

    /// Raw lidar distances, beam `b` at angle `heading + 2πb/B`.
    pub fn lidar(&self) -> Vec<f64> {
        let n = self.config.n_beams;
        (0..n)
            .map(|b| {
                let angle = self.heading + TAU * b as f64 / n as f64;
                let dir = [angle.cos(), angle.sin()];
                self.obstacles
                    .iter()
                    .filter_map(|o| ray_circle_distance(self.pos, dir, o))
                    .fold(self.config.lidar_range, f64::min)
            })
            .collect()
    }

    /// Goal offset rotated into the agent frame (x forward, y left).
    fn goal_in_agent_frame(&self) -> [f64; 2] {
        let dx = self.goal[0] - self.pos[0];
        let dy = self.goal[1] - self.pos[1];
        let (s, c) = self.heading.sin_cos();
        [c * dx + s * dy, -s * dx + c * dy]
    }

    fn collides(&self, from: [f64; 2], to: [f64; 2]) -> bool {
        let w = self.config.world_size;
        if !(0.0..=w).contains(&to[0]) || !(0.0..=w).contains(&to[1]) {
            return true;
        }
        self.obstacles
            .iter()
            .any(|o| segment_point_distance(from, to, o.center) < o.radius)
    }

    fn place(&mut self, seed: u64) -> Result<()> {
        let cfg = &self.config;
        let mut rng = seed::rng(seed);
        let w = cfg.world_size;
        let pos = [rng.gen_range(1.0..3.0), rng.gen_range(2.0..w - 2.0)];
        let goal = [rng.gen_range(w - 3.0..w - 1.0), rng.gen_range(2.0..w - 2.0)];
        let heading = rng.gen_range(-PI..PI);
        let mut obstacles: Vec<Obstacle> = Vec::with_capacity(cfg.n_obstacles);
        let mut attempts = 0;
        while obstacles.len() < cfg.n_obstacles {
            attempts += 1;
            if attempts > cfg.max_placement_attempts {
                return Err(Error::config(format!(
                    "could not place {} obstacles after {} attempts; field too dense",
                    cfg.n_obstacles, cfg.max_placement_attempts
                )));
            }
            let radius = rng.gen_range(cfg.radius_min..=cfg.radius_max);
            let center = [
                rng.gen_range(0.25 * w..0.75 * w),
                rng.gen_range(0.15 * w..0.85 * w),
            ];
            let clear_of = |p: [f64; 2]| dist(center, p) >= radius + cfg.spawn_clearance;
            let spaced = obstacles
                .iter()
                .all(|o| dist(center, o.center) >= radius + o.radius + cfg.min_gap);
            if clear_of(pos) && clear_of(goal) && spaced {
                obstacles.push(Obstacle { center, radius });
            }
        }
        self.set_state(pos, heading, goal, obstacles);
        Ok(())
    }

    /// Obstacle blocking the straight segment to `target` (inflated by `margin`), nearest first.
    fn first_blocking(&self, target: [f64; 2], margin: f64) -> Option<&Obstacle> {
        let (dx, dy) = (target[0] - self.pos[0], target[1] - self.pos[1]);
        let len = dx.hypot(dy).max(1e-12);
        self.obstacles
            .iter()
            .filter(|o| segment_point_distance(self.pos, target, o.center) < o.radius + margin)
            .min_by(|a, b| {
                let along = |o: &Obstacle| {
                    ((o.center[0] - self.pos[0]) * dx + (o.center[1] - self.pos[1]) * dy) / len
                };
                along(a).total_cmp(&along(b))
            })
    }

    /// Tangent-following expert.
    fn expert(&self) -> [f64; 2] {
        let cfg = &self.config;
        let margin = cfg.expert_margin;
        let goal_bearing =
            (self.goal[1] - self.pos[1]).atan2(self.goal[0] - self.pos[0]);
        let mut desired = goal_bearing;
        let mut throttle: f64 = 1.0;

        if let Some(o) = self.first_blocking(self.goal, margin) {
            let inflated = o.radius + margin;
            let d = dist(self.pos, o.center);
            let to_center = (o.center[1] - self.pos[1]).atan2(o.center[0] - self.pos[0]);
            // side: +1 passes with the obstacle on the right (turn left of it)
            let side = if wrap_angle(goal_bearing - to_center) >= 0.0 { 1.0 } else { -1.0 };
            let candidate = |side: f64| -> f64 {
                if d > inflated {
                    to_center + side * (inflated / d).asin()
                } else {
                    // inside the clearance band: slide along the circle, easing outward
                    to_center + side * (PI / 2.0 + 0.3 * (inflated - d) / margin)
                }
            };
            let w = cfg.world_size;
            let stays_inside = |angle: f64| {
                let look = d.max(1.0);
                let p = [self.pos[0] + look * angle.cos(), self.pos[1] + look * angle.sin()];
                p[0] > 0.3 && p[0] < w - 0.3 && p[1] > 0.3 && p[1] < w - 0.3
            };
            desired = candidate(side);
            if !stays_inside(desired) {
                desired = candidate(-side);
            }
            if d - o.radius < 2.0 * margin {
                throttle = 0.0;
            }
        }

        let error = wrap_angle(desired - self.heading);
        let turn = (error / cfg.max_turn).clamp(-1.0, 1.0);
        if error.abs() > 1.0 {
            throttle = throttle.min(-0.5);
        }
        [turn, throttle]
    }
}

impl Env for WaypointWorld {
    fn name(&self) -> &'static str {
        "waypoint"
    }

    fn obs_dim(&self) -> usize {
        self.config.n_beams + 5
    }

    fn act_dim(&self) -> usize {
        2
    }

    fn trace_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.place(seed)?;
        Ok(self.observation())
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep> {
        if self.done {
            return Err(Error::Contract("step called on a finished episode".into()));
        }
        if action.len() != 2 {
            return Err(Error::invalid(format!("expected 2 actions, got {}", action.len())));
        }
        let cfg = &self.config;
        let a = clip_unit(action);
        self.heading = wrap_angle(self.heading + a[0] * cfg.max_turn);
        self.speed = cfg.max_speed * (a[1] + 1.0) / 2.0;
        let prev = self.pos;
        let next = [
            prev[0] + self.speed * self.heading.cos(),
            prev[1] + self.speed * self.heading.sin(),
        ];
        let before = dist(prev, self.goal);
        let after = dist(next, self.goal);
        let mut reward = (before - after) * cfg.progress_gain - cfg.time_penalty;
        let collided = self.collides(prev, next);
        let reached = segment_point_distance(prev, next, self.goal) <= cfg.goal_radius;
        self.pos = next;
        self.steps += 1;
        if collided {
            reward -= cfg.collision_penalty;
            self.done = true;
        } else if reached {
            reward += cfg.goal_bonus;
            self.done = true;
        }
        if self.steps >= cfg.horizon {
            self.done = true;
        }
        Ok(EnvStep {
            observation: self.observation(),
            reward,
            done: self.done,
            step: self.steps,
        })
    }

    fn observation(&self) -> Vec<f64> {
        let cfg = &self.config;
        let mut obs: Vec<f64> = self.lidar().iter().map(|r| r / cfg.lidar_range).collect();
        let g = self.goal_in_agent_frame();
        obs.push(g[0] / cfg.lidar_range);
        obs.push(g[1] / cfg.lidar_range);
        obs.push(self.speed / cfg.max_speed);
        obs.push(self.heading.sin());
        obs.push(self.heading.cos());
        obs
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn expert_action(&self) -> Vec<f64> {
        self.expert().to_vec()
    }

    fn trace_point(&self) -> Vec<f64> {
        self.pos.to_vec()
    }
}
