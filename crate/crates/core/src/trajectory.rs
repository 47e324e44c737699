//! Episodes and groups of episodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::vecmath::all_finite;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

impl Action {
    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            Action::Continuous(v) => Some(v),
            Action::Discrete(_) => None,
        }
    }

    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Action::Discrete(i) => Some(*i),
            Action::Continuous(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoneReason {
    Horizon,
    Terminal,
    Infraction,
}

/// One episode. `states[t]` is the state in which `actions[t]` was taken and
/// `aux[t]` holds the environment statistics produced by that step.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub aux: Vec<Vec<f64>>,
    /// The environment's own per-step reward. Only baselines read it.
    pub env_rewards: Vec<f64>,
    pub done_reason: DoneReason,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.actions.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let n = self.actions.len();
        for (ctx, got) in [
            ("trajectory states", self.states.len()),
            ("trajectory aux", self.aux.len()),
            ("trajectory rewards", self.env_rewards.len()),
        ] {
            if got != n {
                return Err(Error::Dimension {
                    context: ctx,
                    expected: n,
                    got,
                });
            }
        }
        let finite = self.states.iter().all(|s| all_finite(s))
            && self.aux.iter().all(|a| all_finite(a))
            && all_finite(&self.env_rewards)
            && self.actions.iter().all(|a| match a {
                Action::Continuous(v) => all_finite(v),
                Action::Discrete(_) => true,
            });
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite("trajectory"))
        }
    }
}

/// A group of trajectories produced by one policy version; the unit on which
/// metrics are computed and the unit stored in the replay buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
    pub generator_tag: String,
}

impl TrajectorySet {
    pub fn new(trajectories: Vec<Trajectory>, generator_tag: impl Into<String>) -> Self {
        Self {
            trajectories,
            generator_tag: generator_tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn total_steps(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// Draw `size` member trajectories without replacement. Returns a clone of
    /// the whole set when `size` is at least the set size.
    pub fn subsample(&self, size: usize, rng: &mut Rng) -> TrajectorySet {
        if size >= self.len() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        rng.shuffle(&mut idx);
        idx.truncate(size);
        idx.sort_unstable();
        TrajectorySet {
            trajectories: idx.iter().map(|&i| self.trajectories[i].clone()).collect(),
            generator_tag: self.generator_tag.clone(),
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// A trajectory with `len` steps of 2-d states, 1-d continuous actions and
    /// a single aux value per step.
    pub fn simple(len: usize, aux_value: f64) -> Trajectory {
        Trajectory {
            states: (0..len).map(|t| vec![t as f64, 1.0]).collect(),
            actions: (0..len).map(|t| Action::Continuous(vec![0.1 * t as f64])).collect(),
            aux: vec![vec![aux_value]; len],
            env_rewards: vec![0.0; len],
            done_reason: DoneReason::Horizon,
        }
    }
}
