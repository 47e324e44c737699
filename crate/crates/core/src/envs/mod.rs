//! Episodic environments and their trajectory evaluation functions.
//!
//! Three small simulators are bundled: [`PointGoal`] (sparse-reward reaching),
//! [`QueueNet`] (bandwidth allocation on a shared bottleneck) and
//! [`DriveLoop`] (lane keeping and overtaking on a loop road). Each one also
//! defines ν, the map from a whole trajectory to a vector of statistics that
//! the global metric aggregates.

mod drive_loop;
mod point_goal;
mod queue_net;

pub use drive_loop::{DriveAction, DriveLoop, DriveLoopConfig};
pub use point_goal::{PointGoal, PointGoalConfig, RewardMode};
pub use queue_net::{engineered_reward, QueueNet, QueueNetConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::trajectory::{Action, DoneReason, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    Continuous(usize),
    Discrete(usize),
}

impl ActionKind {
    /// Width of the action encoding fed to reward networks: raw values for
    /// continuous actions, one-hot for discrete ones.
    pub fn encoding_dim(self) -> usize {
        match self {
            ActionKind::Continuous(d) | ActionKind::Discrete(d) => d,
        }
    }

    pub fn validate(self, action: &Action) -> Result<()> {
        match (self, action) {
            (ActionKind::Continuous(d), Action::Continuous(v)) => {
                if v.len() != d {
                    Err(Error::InvalidAction(format!("expected {d} components, got {}", v.len())))
                } else if v.iter().any(|x| !x.is_finite()) {
                    Err(Error::InvalidAction("non-finite component".into()))
                } else {
                    Ok(())
                }
            }
            (ActionKind::Discrete(n), Action::Discrete(i)) => {
                if *i < n {
                    Ok(())
                } else {
                    Err(Error::InvalidAction(format!("index {i} out of range 0..{n}")))
                }
            }
            _ => Err(Error::InvalidAction("action kind mismatch".into())),
        }
    }

    /// Uniformly random action: each component in `[-1, 1]` for continuous
    /// actions, a uniform index for discrete ones.
    pub fn random(self, rng: &mut Rng) -> Action {
        match self {
            ActionKind::Continuous(d) => Action::Continuous((0..d).map(|_| rng.uniform_range(-1.0, 1.0)).collect()),
            ActionKind::Discrete(n) => Action::Discrete(rng.below(n)),
        }
    }

    /// Append the reward-network encoding of `action` to `out`.
    pub fn encode_into(self, action: &Action, out: &mut Vec<f64>) {
        match (self, action) {
            (ActionKind::Continuous(_), Action::Continuous(v)) => out.extend_from_slice(v),
            (ActionKind::Discrete(n), Action::Discrete(i)) => {
                out.extend((0..n).map(|k| if k == *i { 1.0 } else { 0.0 }));
            }
            _ => panic!("action kind mismatch in encoding"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_kind: ActionKind,
    pub horizon: usize,
    pub nu_dim: usize,
}

/// Result of one environment transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub aux: Vec<f64>,
    /// The environment's built-in reward, used only by baselines.
    pub reward: f64,
    pub done: bool,
    pub done_reason: Option<DoneReason>,
}

/// Trajectory evaluation function ν.
pub trait TrajectoryEval: Sync {
    fn nu_dim(&self) -> usize;
    fn nu(&self, traj: &Trajectory) -> Result<Vec<f64>>;
}

pub trait Env: TrajectoryEval + Send {
    fn spec(&self) -> EnvSpec;

    /// Sample an initial state; the environment forks its internal randomness
    /// from `rng`.
    fn reset(&mut self, rng: &mut Rng) -> Vec<f64>;

    fn step(&mut self, action: &Action) -> Result<Step>;

    /// Copy of the full internal state, for baselines that restart rollouts
    /// from an arbitrary state. `None` when the environment cannot do this.
    fn snapshot(&self) -> Option<Box<dyn Env>> {
        None
    }
}

/// Serializable environment selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EnvConfig {
    #[serde(rename = "pointgoal")]
    PointGoal(PointGoalConfig),
    #[serde(rename = "queuenet")]
    QueueNet(QueueNetConfig),
    #[serde(rename = "driveloop")]
    DriveLoop(DriveLoopConfig),
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::PointGoal(_) => "pointgoal",
            EnvConfig::QueueNet(_) => "queuenet",
            EnvConfig::DriveLoop(_) => "driveloop",
        }
    }

    pub fn build(&self) -> Result<Box<dyn Env>> {
        Ok(match self {
            EnvConfig::PointGoal(c) => Box::new(PointGoal::new(c.clone())?),
            EnvConfig::QueueNet(c) => Box::new(QueueNet::new(c.clone())?),
            EnvConfig::DriveLoop(c) => Box::new(DriveLoop::new(c.clone())?),
        })
    }
}

/// Run one episode, choosing actions with `policy`. The callback receives the
/// current state and the step index.
pub fn run_episode<F>(env: &mut dyn Env, rng: &mut Rng, mut policy: F) -> Result<Trajectory>
where
    F: FnMut(&[f64], usize, &mut Rng) -> Result<Action>,
{
    let spec = env.spec();
    let mut state = env.reset(rng);
    let mut traj = Trajectory {
        states: Vec::with_capacity(spec.horizon),
        actions: Vec::with_capacity(spec.horizon),
        aux: Vec::with_capacity(spec.horizon),
        env_rewards: Vec::with_capacity(spec.horizon),
        done_reason: DoneReason::Horizon,
    };
    for t in 0..spec.horizon {
        let action = policy(&state, t, rng)?;
        let step = env.step(&action)?;
        traj.states.push(std::mem::replace(&mut state, step.state));
        traj.actions.push(action);
        traj.aux.push(step.aux);
        traj.env_rewards.push(step.reward);
        if step.done {
            traj.done_reason = step.done_reason.unwrap_or(DoneReason::Horizon);
            break;
        }
    }
    Ok(traj)
}

/// ν wrapper for risk-sensitive objectives: `exp(β · ν₀(τ))` where `ν₀` is
/// the scalar evaluation of the wrapped environment.
pub struct ExpNu<'a> {
    pub inner: &'a dyn TrajectoryEval,
    pub beta: f64,
}

impl TrajectoryEval for ExpNu<'_> {
    fn nu_dim(&self) -> usize {
        1
    }

    fn nu(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        let base = self.inner.nu(traj)?;
        let first = *base.first().ok_or(Error::EmptyTrajectory)?;
        Ok(vec![(self.beta * first).exp()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_kind_validation() {
        let k = ActionKind::Continuous(2);
        assert!(k.validate(&Action::Continuous(vec![0.0, 1.0])).is_ok());
        assert!(k.validate(&Action::Continuous(vec![0.0])).is_err());
        assert!(k.validate(&Action::Continuous(vec![0.0, f64::NAN])).is_err());
        assert!(k.validate(&Action::Discrete(0)).is_err());
        let d = ActionKind::Discrete(3);
        assert!(d.validate(&Action::Discrete(2)).is_ok());
        assert!(d.validate(&Action::Discrete(3)).is_err());
    }

    #[test]
    fn one_hot_encoding() {
        let mut v = vec![9.0];
        ActionKind::Discrete(4).encode_into(&Action::Discrete(2), &mut v);
        assert_eq!(v, vec![9.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn random_actions_in_box() {
        let mut rng = Rng::new(0);
        for _ in 0..100 {
            let a = ActionKind::Continuous(3).random(&mut rng);
            assert!(a.as_continuous().unwrap().iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }
}
