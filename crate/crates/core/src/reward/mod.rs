//! Learned vector rewards: the reward network, its target copy, discounted
//! vector returns, the joint reward/aggregator loss and optimistic sampling.

mod diversity;
mod loss;
mod sampling;

pub use diversity::{distance, distance_grad, softmax, DiversityKind};
pub use loss::{reward_loss, FitMode, RewardLossConfig, RewardLossOutput};
pub use sampling::{optimistic_sample, top_k_stable, OptimisticSample};

use crate::envs::ActionKind;
use crate::error::{check_dim, Error, Result};
use crate::nn::{Activation, Mlp, ParamVector};
use crate::rng::Rng;
use crate::trajectory::{Action, Trajectory};

/// Maps `(state, action encoding)` to a reward vector of dimension `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardNet {
    pub net: Mlp,
    state_dim: usize,
    action_kind: ActionKind,
}

impl RewardNet {
    pub fn new(
        state_dim: usize,
        action_kind: ActionKind,
        dim: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("reward dimension must be at least 1".into()));
        }
        let mut sizes = vec![state_dim + action_kind.encoding_dim()];
        sizes.extend_from_slice(hidden);
        sizes.push(dim);
        Ok(Self {
            net: Mlp::new(&sizes, activation, rng)?,
            state_dim,
            action_kind,
        })
    }

    pub fn from_mlp(net: Mlp, state_dim: usize, action_kind: ActionKind) -> Result<Self> {
        check_dim("reward net input", state_dim + action_kind.encoding_dim(), net.input_dim())?;
        Ok(Self {
            net,
            state_dim,
            action_kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn params(&self) -> &ParamVector {
        &self.net.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.net.params
    }

    pub fn encode(&self, state: &[f64], action: &Action) -> Result<Vec<f64>> {
        check_dim("reward net state", self.state_dim, state.len())?;
        self.action_kind.validate(action)?;
        let mut x = Vec::with_capacity(self.net.input_dim());
        x.extend_from_slice(state);
        self.action_kind.encode_into(action, &mut x);
        Ok(x)
    }

    pub fn reward_vec(&self, state: &[f64], action: &Action) -> Result<Vec<f64>> {
        self.net.forward(&self.encode(state, action)?)
    }

    /// Discounted vector return `Σ_t γ^t r(s_t, a_t)`.
    pub fn traj_return(&self, traj: &Trajectory, gamma: f64) -> Result<Vec<f64>> {
        traj_return(|s, a| self.reward_vec(s, a), self.dim(), traj, gamma)
    }
}

/// Frozen copy of the reward network, mixed into the rewards used for
/// policy training.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetRewardNet {
    pub net: RewardNet,
    pub mix_weight: f64,
    pub copy_interval: usize,
}

impl TargetRewardNet {
    pub fn new(online: &RewardNet, mix_weight: f64, copy_interval: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&mix_weight) {
            return Err(Error::Config(format!("target mix weight {mix_weight} outside [0, 1]")));
        }
        if copy_interval == 0 {
            return Err(Error::Config("target copy interval must be positive".into()));
        }
        Ok(Self {
            net: online.clone(),
            mix_weight,
            copy_interval,
        })
    }

    /// Copy the online parameters when `iteration` is a multiple of the copy
    /// interval. Returns whether a copy happened.
    pub fn sync(&mut self, online: &RewardNet, iteration: usize) -> Result<bool> {
        target_sync(online, &mut self.net, iteration, self.copy_interval)
    }

    pub fn mixed_reward(&self, online: &RewardNet, state: &[f64], action: &Action) -> Result<Vec<f64>> {
        mixed_reward(online, &self.net, self.mix_weight, state, action)
    }
}

/// `α · r_target + (1 − α) · r_online`.
pub fn mixed_reward(online: &RewardNet, target: &RewardNet, alpha: f64, state: &[f64], action: &Action) -> Result<Vec<f64>> {
    if !online.net.same_architecture(&target.net) {
        return Err(Error::Config("online and target reward nets differ in architecture".into()));
    }
    let x = online.encode(state, action)?;
    if alpha == 0.0 {
        return online.net.forward(&x);
    }
    if alpha == 1.0 {
        return target.net.forward(&x);
    }
    let a = online.net.forward(&x)?;
    let b = target.net.forward(&x)?;
    Ok(a.iter().zip(&b).map(|(o, t)| alpha * t + (1.0 - alpha) * o).collect())
}

pub fn target_sync(online: &RewardNet, target: &mut RewardNet, iteration: usize, copy_interval: usize) -> Result<bool> {
    if !online.net.same_architecture(&target.net) {
        return Err(Error::Config("online and target reward nets differ in architecture".into()));
    }
    if copy_interval > 0 && iteration % copy_interval == 0 {
        target.net.params.copy_from(&online.net.params)?;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Discounted sum of a per-step vector reward along `traj`.
pub fn traj_return<F>(mut reward: F, dim: usize, traj: &Trajectory, gamma: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &Action) -> Result<Vec<f64>>,
{
    crate::vecmath::check_episodic_gamma(gamma)?;
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let mut total = vec![0.0; dim];
    let mut w = 1.0;
    for (s, a) in traj.states.iter().zip(&traj.actions) {
        let r = reward(s, a)?;
        check_dim("step reward", dim, r.len())?;
        for (acc, v) in total.iter_mut().zip(&r) {
            *acc += w * v;
        }
        w *= gamma;
    }
    Ok(total)
}
