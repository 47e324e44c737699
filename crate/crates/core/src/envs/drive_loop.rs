use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::trajectory::{Action, DoneReason, Trajectory};
use crate::vecmath::compensated_sum;

use super::{ActionKind, Env, EnvSpec, Step, TrajectoryEval};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(usize)]
pub enum DriveAction {
    Accelerate = 0,
    Brake = 1,
    SteerLeft = 2,
    SteerRight = 3,
    NoOp = 4,
}

impl DriveAction {
    pub const COUNT: usize = 5;

    pub fn from_index(i: usize) -> Option<Self> {
        use DriveAction::*;
        [Accelerate, Brake, SteerLeft, SteerRight, NoOp].get(i).copied()
    }

    pub fn action(self) -> Action {
        Action::Discrete(self as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveLoopConfig {
    pub route_length: f64,
    pub lanes: usize,
    /// Lane width; a lane's half-width is `lane_width / 2`.
    pub lane_width: f64,
    pub hazards: usize,
    pub horizon: usize,
    pub max_speed: f64,
    pub speed_step: f64,
    pub steer_step: f64,
    /// Standard deviation of the random lateral drift per step.
    pub lateral_drift: f64,
    pub hazard_speed_min: f64,
    pub hazard_speed_max: f64,
    pub vehicle_length: f64,
    /// Look-ahead distance used to normalize hazard observations.
    pub sensor_range: f64,
}

impl Default for DriveLoopConfig {
    fn default() -> Self {
        Self {
            route_length: 100.0,
            lanes: 3,
            lane_width: 1.0,
            hazards: 4,
            horizon: 100,
            max_speed: 2.0,
            speed_step: 0.5,
            steer_step: 0.5,
            lateral_drift: 0.1,
            hazard_speed_min: 0.4,
            hazard_speed_max: 1.0,
            vehicle_length: 1.0,
            sensor_range: 20.0,
        }
    }
}

#[derive(Clone, Debug)]
struct Hazard {
    x: f64,
    lane: usize,
    speed: f64,
}

/// Ego vehicle on a one-lap loop road with slower vehicles to overtake.
///
/// Observation: route progress, lateral position, signed offset from the lane
/// center, speed, per-lane distance to and speed of the nearest vehicle ahead,
/// elapsed fraction of the horizon. Actions: accelerate, brake, steer left,
/// steer right, no-op. Aux per step:
/// `(lane_center_distance, progress_delta, infraction)`.
#[derive(Clone, Debug)]
pub struct DriveLoop {
    cfg: DriveLoopConfig,
    progress: f64,
    lateral: f64,
    speed: f64,
    hazards: Vec<Hazard>,
    t: usize,
    rng: Rng,
}

pub(crate) const AUX_CENTER: usize = 0;
pub(crate) const AUX_PROGRESS: usize = 1;

impl DriveLoop {
    pub fn new(cfg: DriveLoopConfig) -> Result<Self> {
        if cfg.route_length <= 0.0 || cfg.lanes == 0 || cfg.lane_width <= 0.0 || cfg.horizon == 0 {
            return Err(Error::Config(
                "driveloop: route, lanes, lane width and horizon must be positive".into(),
            ));
        }
        if cfg.hazard_speed_min > cfg.hazard_speed_max || cfg.max_speed <= 0.0 {
            return Err(Error::Config("driveloop: inconsistent speed bounds".into()));
        }
        let lateral = lane_center(cfg.lanes / 2, cfg.lane_width);
        Ok(Self {
            progress: 0.0,
            lateral,
            speed: 0.0,
            hazards: Vec::new(),
            t: 0,
            rng: Rng::new(0),
            cfg,
        })
    }

    pub fn config(&self) -> &DriveLoopConfig {
        &self.cfg
    }

    pub fn progress(&self) -> f64 {
        self.progress
    }

    /// Remove all other vehicles and disable lateral drift, for scripted tests.
    pub fn clear_traffic(&mut self) {
        self.hazards.clear();
        self.cfg.lateral_drift = 0.0;
    }

    pub fn set_speed(&mut self, speed: f64) {
        self.speed = speed.clamp(0.0, self.cfg.max_speed);
    }

    /// Place a vehicle `gap` ahead of the ego vehicle in `lane`.
    pub fn add_hazard(&mut self, gap: f64, lane: usize, speed: f64) {
        let x = (self.progress + gap).rem_euclid(self.cfg.route_length);
        self.hazards.push(Hazard { x, lane, speed });
    }

    fn lane_index(&self) -> usize {
        ((self.lateral / self.cfg.lane_width) as usize).min(self.cfg.lanes - 1)
    }

    fn center_offset(&self) -> f64 {
        self.lateral - lane_center(self.lane_index(), self.cfg.lane_width)
    }

    /// Signed loop distance from the ego vehicle to `x`, in `[-L/2, L/2)`.
    fn gap_to(&self, x: f64) -> f64 {
        let l = self.cfg.route_length;
        let ego = self.progress.rem_euclid(l);
        (x - ego + l / 2.0).rem_euclid(l) - l / 2.0
    }

    fn observe(&self) -> Vec<f64> {
        let c = &self.cfg;
        let mut obs = Vec::with_capacity(5 + 2 * c.lanes);
        obs.push(self.progress / c.route_length);
        obs.push(self.lateral / (c.lanes as f64 * c.lane_width));
        obs.push(self.center_offset() / (c.lane_width / 2.0));
        obs.push(self.speed / c.max_speed);
        let mut nearest = vec![(c.sensor_range, 0.0); c.lanes];
        for h in &self.hazards {
            let g = self.gap_to(h.x);
            if g > -c.vehicle_length && g < nearest[h.lane].0 {
                nearest[h.lane] = (g, h.speed);
            }
        }
        obs.extend(nearest.iter().map(|(g, _)| g / c.sensor_range));
        obs.extend(nearest.iter().map(|(_, v)| v / c.max_speed));
        obs.push(self.t as f64 / c.horizon as f64);
        obs
    }
}

fn lane_center(lane: usize, width: f64) -> f64 {
    (lane as f64 + 0.5) * width
}

impl TrajectoryEval for DriveLoop {
    fn nu_dim(&self) -> usize {
        4
    }

    /// `(completed, steps used, mean lane-center distance, valid distance)`.
    fn nu(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        if traj.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let n = traj.len() as f64;
        let complete = if traj.done_reason == DoneReason::Terminal { 1.0 } else { 0.0 };
        let center = compensated_sum(traj.aux.iter().map(|a| a[AUX_CENTER])) / n;
        let distance = compensated_sum(traj.aux.iter().map(|a| a[AUX_PROGRESS]));
        Ok(vec![complete, n, center, distance.min(self.cfg.route_length)])
    }
}

impl Env for DriveLoop {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            state_dim: 5 + 2 * self.cfg.lanes,
            action_kind: ActionKind::Discrete(DriveAction::COUNT),
            horizon: self.cfg.horizon,
            nu_dim: 4,
        }
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        self.rng = rng.fork();
        self.progress = 0.0;
        self.lateral = lane_center(self.cfg.lanes / 2, self.cfg.lane_width);
        self.speed = 0.0;
        self.t = 0;
        self.hazards.clear();
        let l = self.cfg.route_length;
        let spacing = l * 0.85 / self.cfg.hazards.max(1) as f64;
        for k in 0..self.cfg.hazards {
            let lo = 0.1 * l + k as f64 * spacing;
            let x = self.rng.uniform_range(lo, lo + 0.8 * spacing);
            let lane = self.rng.below(self.cfg.lanes);
            let speed = self.rng.uniform_range(self.cfg.hazard_speed_min, self.cfg.hazard_speed_max);
            self.hazards.push(Hazard { x, lane, speed });
        }
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Result<Step> {
        self.spec().action_kind.validate(action)?;
        let c = self.cfg.clone();
        let act = DriveAction::from_index(action.as_discrete().expect("validated")).expect("validated");
        match act {
            DriveAction::Accelerate => self.speed = (self.speed + c.speed_step).min(c.max_speed),
            DriveAction::Brake => self.speed = (self.speed - c.speed_step).max(0.0),
            DriveAction::SteerLeft => self.lateral -= c.steer_step,
            DriveAction::SteerRight => self.lateral += c.steer_step,
            DriveAction::NoOp => {}
        }
        if c.lateral_drift > 0.0 {
            self.lateral += c.lateral_drift * self.rng.normal();
        }
        let road = c.lanes as f64 * c.lane_width;
        self.lateral = self.lateral.clamp(0.0, road - 1e-9);

        let gaps_before: Vec<f64> = self.hazards.iter().map(|h| self.gap_to(h.x)).collect();
        let remaining = (c.route_length - self.progress).max(0.0);
        let progress_delta = self.speed.min(remaining);
        self.progress += progress_delta;
        for h in &mut self.hazards {
            h.x = (h.x + h.speed).rem_euclid(c.route_length);
        }
        self.t += 1;

        let lane = self.lane_index();
        let crashed = self.hazards.iter().zip(&gaps_before).any(|(h, &before)| {
            if h.lane != lane {
                return false;
            }
            let after = self.gap_to(h.x);
            let overlapping = after.abs() < c.vehicle_length;
            let passed_through = before >= 0.0 && after < 0.0 && before - after < c.route_length / 2.0;
            overlapping || passed_through
        });
        let center = self.center_offset().abs();
        let completed = self.progress >= c.route_length;
        let (done, done_reason) = if crashed {
            (true, Some(DoneReason::Infraction))
        } else if completed {
            (true, Some(DoneReason::Terminal))
        } else if self.t >= c.horizon {
            (true, Some(DoneReason::Horizon))
        } else {
            (false, None)
        };
        Ok(Step {
            state: self.observe(),
            aux: vec![center, progress_delta, if crashed { 1.0 } else { 0.0 }],
            reward: progress_delta,
            done,
            done_reason,
        })
    }

    fn snapshot(&self) -> Option<Box<dyn Env>> {
        Some(Box::new(self.clone()))
    }
}
