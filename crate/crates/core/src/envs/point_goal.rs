use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::trajectory::{Action, DoneReason, Trajectory};
use crate::vecmath::{check_gamma, compensated_sum};

use super::{ActionKind, Env, EnvSpec, Step, TrajectoryEval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// `1` on reaching the goal, minus a per-step cost.
    Sparse,
    /// Sparse reward plus the per-step reduction in distance to the goal.
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointGoalConfig {
    pub horizon: usize,
    pub max_accel: f64,
    pub success_radius: f64,
    /// Smallest start-to-goal distance drawn at reset.
    pub min_goal_distance: f64,
    /// Fraction of velocity retained each step.
    pub velocity_retention: f64,
    pub step_cost: f64,
    /// Discount applied inside ν.
    pub nu_gamma: f64,
    pub reward: RewardMode,
}

impl Default for PointGoalConfig {
    fn default() -> Self {
        Self {
            horizon: 64,
            max_accel: 0.1,
            success_radius: 0.1,
            min_goal_distance: 0.3,
            velocity_retention: 0.8,
            step_cost: 0.01,
            nu_gamma: 0.99,
            reward: RewardMode::Sparse,
        }
    }
}

/// Point mass in `[-1, 1]²` that must reach a goal disc.
///
/// Observation: position, velocity, goal offset, elapsed fraction of the
/// horizon. Action: 2-d acceleration, scaled by `max_accel` and clipped to
/// `±max_accel`. Aux per step: `(success, distance_to_goal, distance_reduction)`.
#[derive(Clone, Debug)]
pub struct PointGoal {
    cfg: PointGoalConfig,
    pos: [f64; 2],
    vel: [f64; 2],
    goal: [f64; 2],
    t: usize,
}

const AUX_SUCCESS: usize = 0;

impl PointGoal {
    pub fn new(cfg: PointGoalConfig) -> Result<Self> {
        check_gamma(cfg.nu_gamma)?;
        if cfg.horizon == 0 || cfg.success_radius <= 0.0 || cfg.max_accel <= 0.0 {
            return Err(Error::Config(
                "pointgoal: horizon, radius and max_accel must be positive".into(),
            ));
        }
        // Larger gaps make rejection sampling in the reset box slow or endless.
        if !(cfg.min_goal_distance > cfg.success_radius && cfg.min_goal_distance <= 1.5) {
            return Err(Error::Config(
                "pointgoal: min_goal_distance must lie in (success_radius, 1.5]".into(),
            ));
        }
        Ok(Self {
            cfg,
            pos: [0.0; 2],
            vel: [0.0; 2],
            goal: [0.5, 0.5],
            t: 0,
        })
    }

    pub fn config(&self) -> &PointGoalConfig {
        &self.cfg
    }

    /// Place agent and goal explicitly (velocity zero, clock reset).
    pub fn set_positions(&mut self, pos: [f64; 2], goal: [f64; 2]) {
        self.pos = pos;
        self.vel = [0.0; 2];
        self.goal = goal;
        self.t = 0;
    }

    pub fn distance(&self) -> f64 {
        dist(self.pos, self.goal)
    }

    fn observe(&self) -> Vec<f64> {
        vec![
            self.pos[0],
            self.pos[1],
            self.vel[0],
            self.vel[1],
            self.goal[0] - self.pos[0],
            self.goal[1] - self.pos[1],
            self.t as f64 / self.cfg.horizon as f64,
        ]
    }

    fn sparse_reward(&self, success: bool) -> f64 {
        (if success { 1.0 } else { 0.0 }) - self.cfg.step_cost
    }

    fn step_reward(&self, success: bool, progress: f64) -> f64 {
        match self.cfg.reward {
            RewardMode::Sparse => self.sparse_reward(success),
            RewardMode::Dense => self.sparse_reward(success) + progress,
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Distance from `p` to the segment `a → b`.
fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(a, p);
    }
    let s = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist([a[0] + s * ab[0], a[1] + s * ab[1]], p)
}

impl TrajectoryEval for PointGoal {
    fn nu_dim(&self) -> usize {
        1
    }

    /// Discounted return of the sparse reward, whatever reward the
    /// environment hands out per step.
    fn nu(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        if traj.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let mut w = 1.0;
        let terms = traj.aux.iter().map(|aux| {
            let r = self.sparse_reward(aux[AUX_SUCCESS] > 0.5);
            let term = w * r;
            w *= self.cfg.nu_gamma;
            term
        });
        Ok(vec![compensated_sum(terms.collect::<Vec<_>>())])
    }
}

impl Env for PointGoal {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            state_dim: 7,
            action_kind: ActionKind::Continuous(2),
            horizon: self.cfg.horizon,
            nu_dim: 1,
        }
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        // Redraw both points: from a central start no goal may be far enough.
        let (pos, goal) = loop {
            let p = [rng.uniform_range(-0.9, 0.9), rng.uniform_range(-0.9, 0.9)];
            let g = [rng.uniform_range(-0.9, 0.9), rng.uniform_range(-0.9, 0.9)];
            if dist(g, p) >= self.cfg.min_goal_distance {
                break (p, g);
            }
        };
        self.set_positions(pos, goal);
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Result<Step> {
        self.spec().action_kind.validate(action)?;
        let a = action.as_continuous().expect("validated");
        let before = self.pos;
        let d_before = self.distance();
        for k in 0..2 {
            let accel = (self.cfg.max_accel * a[k]).clamp(-self.cfg.max_accel, self.cfg.max_accel);
            self.vel[k] = self.cfg.velocity_retention * self.vel[k] + accel;
            let next = self.pos[k] + self.vel[k];
            if !(-1.0..=1.0).contains(&next) {
                self.vel[k] = 0.0;
            }
            self.pos[k] = next.clamp(-1.0, 1.0);
        }
        self.t += 1;
        let success = segment_distance(before, self.pos, self.goal) <= self.cfg.success_radius;
        let d_after = self.distance();
        let progress = d_before - d_after;
        let (done, done_reason) = if success {
            (true, Some(DoneReason::Terminal))
        } else if self.t >= self.cfg.horizon {
            (true, Some(DoneReason::Horizon))
        } else {
            (false, None)
        };
        Ok(Step {
            state: self.observe(),
            aux: vec![if success { 1.0 } else { 0.0 }, d_after, progress],
            reward: self.step_reward(success, progress),
            done,
            done_reason,
        })
    }

    fn snapshot(&self) -> Option<Box<dyn Env>> {
        Some(Box::new(self.clone()))
    }
}
