use crate::envs::{Env, Step};
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp};
use crate::rng::Rng;
use crate::trajectory::{Action, DoneReason, Trajectory, TrajectorySet};

use super::policy::{clip_to_box, Policy};

/// State-value network with one output per reward component.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorCritic {
    pub net: Mlp,
}

impl VectorCritic {
    pub fn new(state_dim: usize, dim: usize, hidden: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(dim);
        Ok(Self {
            net: Mlp::new(&sizes, activation, rng)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn value(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(state)
    }
}

/// One episode collected for a policy update.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    /// The episode as the environment saw it (continuous actions clipped).
    pub traj: Trajectory,
    /// Actions as sampled by the policy, before clipping.
    pub policy_actions: Vec<Action>,
    /// Behavior log-probabilities `log π_θ̄(a_t|s_t)`.
    pub log_probs: Vec<f64>,
    /// Per-step vector rewards.
    pub rewards: Vec<Vec<f64>>,
    /// Critic values `V_φ(s_t)` at collection time.
    pub values: Vec<Vec<f64>>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.traj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traj.is_empty()
    }

    /// Vector returns-to-go `Σ_{k≥t} γ^{k−t} r_k`; no bootstrapping past
    /// the end of the episode.
    pub fn returns_to_go(&self, gamma: f64) -> Vec<Vec<f64>> {
        let dim = self.rewards.first().map_or(0, |r| r.len());
        let mut out = vec![vec![0.0; dim]; self.rewards.len()];
        let mut acc = vec![0.0; dim];
        for t in (0..self.rewards.len()).rev() {
            for (a, r) in acc.iter_mut().zip(&self.rewards[t]) {
                *a = r + gamma * *a;
            }
            out[t].copy_from_slice(&acc);
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBatch {
    pub rollouts: Vec<Rollout>,
}

impl RolloutBatch {
    pub fn steps(&self) -> usize {
        self.rollouts.iter().map(|r| r.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rollouts.is_empty()
    }

    pub fn to_set(&self, tag: impl Into<String>) -> TrajectorySet {
        TrajectorySet::new(self.rollouts.iter().map(|r| r.traj.clone()).collect(), tag)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RolloutSize {
    Episodes(usize),
    /// Whole episodes until at least this many steps were taken.
    Steps(usize),
}

/// Per-step reward source: receives the state, the action the environment
/// executed and the transition.
pub type RewardFn<'a> = dyn FnMut(&[f64], &Action, &Step) -> Result<Vec<f64>> + 'a;

/// Run the policy and record everything a PPO update needs.
pub fn collect_rollout(
    env: &mut dyn Env,
    policy: &Policy,
    critic: Option<&VectorCritic>,
    reward: &mut RewardFn<'_>,
    size: RolloutSize,
    rng: &mut Rng,
) -> Result<RolloutBatch> {
    collect_rollout_observed(env, policy, critic, reward, size, rng, &mut |_, _| Ok(()))
}

/// [`collect_rollout`] that also calls `observe(env, t)` just before each
/// transition, with `t` the step index inside the episode.
pub fn collect_rollout_observed(
    env: &mut dyn Env,
    policy: &Policy,
    critic: Option<&VectorCritic>,
    reward: &mut RewardFn<'_>,
    size: RolloutSize,
    rng: &mut Rng,
    observe: &mut dyn FnMut(&dyn Env, usize) -> Result<()>,
) -> Result<RolloutBatch> {
    let horizon = env.spec().horizon;
    let mut batch = RolloutBatch::default();
    let mut steps = 0;
    loop {
        match size {
            RolloutSize::Episodes(n) if batch.rollouts.len() >= n => break,
            RolloutSize::Steps(n) if steps >= n => break,
            _ => {}
        }
        let mut state = env.reset(rng);
        let mut r = Rollout {
            traj: Trajectory {
                states: Vec::with_capacity(horizon),
                actions: Vec::with_capacity(horizon),
                aux: Vec::with_capacity(horizon),
                env_rewards: Vec::with_capacity(horizon),
                done_reason: DoneReason::Horizon,
            },
            policy_actions: Vec::with_capacity(horizon),
            log_probs: Vec::with_capacity(horizon),
            rewards: Vec::with_capacity(horizon),
            values: Vec::with_capacity(horizon),
        };
        for t in 0..horizon {
            let (raw, lp) = policy.sample(&state, rng)?;
            if !lp.is_finite() {
                return Err(Error::NonFinite("behavior log-probability"));
            }
            let action = clip_to_box(&raw);
            observe(env, t)?;
            let step = env.step(&action)?;
            r.rewards.push(reward(&state, &action, &step)?);
            if let Some(c) = critic {
                r.values.push(c.value(&state)?);
            }
            r.log_probs.push(lp);
            r.policy_actions.push(raw);
            r.traj.states.push(std::mem::take(&mut state));
            r.traj.actions.push(action);
            r.traj.aux.push(step.aux);
            r.traj.env_rewards.push(step.reward);
            state = step.state;
            if step.done {
                r.traj.done_reason = step.done_reason.unwrap_or(DoneReason::Horizon);
                break;
            }
        }
        steps += r.len();
        batch.rollouts.push(r);
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{ActionKind, PointGoal, PointGoalConfig};

    fn setup() -> (PointGoal, Policy, VectorCritic) {
        let mut rng = Rng::new(0);
        let env = PointGoal::new(PointGoalConfig::default()).unwrap();
        let policy = Policy::new(7, ActionKind::Continuous(2), &[8], Activation::Tanh, &mut rng).unwrap();
        let critic = VectorCritic::new(7, 2, &[8], Activation::Tanh, &mut rng).unwrap();
        (env, policy, critic)
    }

    #[test]
    fn reproducible_with_seed() {
        let (mut env, policy, critic) = setup();
        let mut go = || {
            collect_rollout(
                &mut env,
                &policy,
                Some(&critic),
                &mut |_, _, s| Ok(vec![s.reward, 1.0]),
                RolloutSize::Episodes(3),
                &mut Rng::new(9),
            )
            .unwrap()
        };
        assert_eq!(go(), go());
    }

    #[test]
    fn log_probs_match_policy() {
        let (mut env, policy, _) = setup();
        let b = collect_rollout(
            &mut env,
            &policy,
            None,
            &mut |_, _, _| Ok(vec![0.0]),
            RolloutSize::Steps(100),
            &mut Rng::new(1),
        )
        .unwrap();
        assert!(b.steps() >= 100);
        for r in &b.rollouts {
            for t in 0..r.len() {
                assert_eq!(
                    r.log_probs[t],
                    policy.log_prob(&r.traj.states[t], &r.policy_actions[t]).unwrap()
                );
                assert!(r.traj.actions[t].as_continuous().unwrap().iter().all(|x| x.abs() <= 1.0));
            }
        }
    }

    #[test]
    fn returns_to_go_by_hand() {
        let (mut env, policy, _) = setup();
        let mut b = collect_rollout(
            &mut env,
            &policy,
            None,
            &mut |_, _, _| Ok(vec![0.0]),
            RolloutSize::Episodes(1),
            &mut Rng::new(1),
        )
        .unwrap();
        let r = &mut b.rollouts[0];
        r.rewards.truncate(3);
        r.rewards[0] = vec![1.0];
        r.rewards[1] = vec![2.0];
        r.rewards[2] = vec![4.0];
        let g = r.returns_to_go(0.5);
        assert_eq!(g, vec![vec![1.0 + 1.0 + 1.0], vec![2.0 + 2.0], vec![4.0]]);
    }
}
