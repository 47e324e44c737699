use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::metric::RhoHat;
use crate::nn::{clip_grad_norm, Activation, AdamState};
use crate::rng::Rng;

use super::advantage::{advantages, normalize_advantages, AdvantageMode};
use super::policy::{Policy, PolicyOptimizer};
use super::rollout::{RolloutBatch, VectorCritic};

/// Policy-optimization hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Environment steps per rollout.
    pub rollout_steps: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub gamma: f64,
    /// λ of λ-returns; used only by the scalar baseline PPO.
    pub gae_lambda: f64,
    pub clip: f64,
    pub entropy_coef: f64,
    /// Joint gradient-norm cap per minibatch step; 0 disables clipping.
    pub max_grad_norm: f64,
    /// Hidden layer widths of the policy and critic.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub advantage_mode: AdvantageMode,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            lr_actor: 0.0008,
            lr_critic: 0.001,
            rollout_steps: 2048,
            epochs: 10,
            minibatch: 128,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            entropy_coef: 0.001,
            max_grad_norm: 0.5,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
            advantage_mode: AdvantageMode::default(),
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        crate::vecmath::check_episodic_gamma(self.gamma)?;
        if self.rollout_steps == 0 || self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::Config("rollout_steps, epochs and minibatch must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("gae_lambda must lie in [0, 1]".into()));
        }
        if self.clip <= 0.0 || self.lr_actor <= 0.0 || self.lr_critic <= 0.0 {
            return Err(Error::Config("clip range and learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// Actor, critic and their optimizers.
#[derive(Clone, Debug)]
pub struct ActorCritic {
    pub policy: Policy,
    pub critic: VectorCritic,
    pub policy_opt: PolicyOptimizer,
    pub critic_opt: AdamState,
}

impl ActorCritic {
    pub fn new(policy: Policy, critic: VectorCritic, cfg: &PpoConfig) -> Self {
        let policy_opt = PolicyOptimizer::new(&policy, cfg.lr_actor);
        let critic_opt = AdamState::new(critic.net.params.len(), cfg.lr_critic);
        Self {
            policy,
            critic,
            policy_opt,
            critic_opt,
        }
    }
}

/// Averages over the minibatch steps of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub objective: f64,
    pub critic_loss: f64,
    pub mean_ratio: f64,
}

/// `(episode, step)` index of one sample.
pub type StepRef = (usize, usize);

pub fn all_steps(batch: &RolloutBatch) -> Vec<StepRef> {
    batch
        .rollouts
        .iter()
        .enumerate()
        .flat_map(|(e, r)| (0..r.len()).map(move |t| (e, t)))
        .collect()
}

/// `clip_ε(x) = min(max(x, 1−ε), 1+ε)`.
pub fn clip_ratio(x: f64, eps: f64) -> f64 {
    x.clamp(1.0 - eps, 1.0 + eps)
}

/// Clipped surrogate objective plus entropy bonus, averaged over `steps`.
/// Accumulates the gradient of the objective (for ascent) into the policy.
/// Returns the objective and the mean probability ratio.
pub fn ppo_objective(
    policy: &mut Policy,
    batch: &RolloutBatch,
    adv: &[Vec<f64>],
    steps: &[StepRef],
    clip: f64,
    entropy_coef: f64,
) -> Result<(f64, f64)> {
    if steps.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = steps.len() as f64;
    let (mut obj, mut ratio_sum) = (0.0, 0.0);
    for &(e, t) in steps {
        let r = &batch.rollouts[e];
        let action = &r.policy_actions[t];
        let ev = policy.evaluate(&r.traj.states[t], action)?;
        let ratio = (ev.log_prob - r.log_probs[t]).exp();
        if !ratio.is_finite() {
            return Err(Error::NonFinite("probability ratio"));
        }
        let a = adv[e][t];
        let unclipped = ratio * a;
        let clipped = clip_ratio(ratio, clip) * a;
        let c_logp = if unclipped <= clipped { a * ratio / n } else { 0.0 };
        obj += unclipped.min(clipped) / n + entropy_coef * ev.entropy / n;
        ratio_sum += ratio;
        policy.backward(&ev, action, c_logp, entropy_coef / n)?;
    }
    Ok((obj, ratio_sum / n))
}

/// Mean over `steps` of `‖target − V(s)‖²`; accumulates its gradient into
/// the critic.
pub fn critic_loss(critic: &mut VectorCritic, batch: &RolloutBatch, targets: &[Vec<Vec<f64>>], steps: &[StepRef]) -> Result<f64> {
    if steps.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = steps.len() as f64;
    let mut loss = 0.0;
    for &(e, t) in steps {
        let cache = critic.net.forward_cached(&batch.rollouts[e].traj.states[t])?;
        let target = &targets[e][t];
        check_dim("critic target", critic.dim(), target.len())?;
        let g: Vec<f64> = cache
            .output()
            .iter()
            .zip(target)
            .map(|(v, y)| {
                loss += (y - v) * (y - v) / n;
                -2.0 * (y - v) / n
            })
            .collect();
        critic.net.backward(&cache, &g)?;
    }
    Ok(loss)
}

/// Minibatch PPO epochs on precomputed advantages and critic targets.
pub fn ppo_update(
    ac: &mut ActorCritic,
    batch: &RolloutBatch,
    adv: &[Vec<f64>],
    targets: &[Vec<Vec<f64>>],
    cfg: &PpoConfig,
    rng: &mut Rng,
) -> Result<UpdateStats> {
    let mut steps = all_steps(batch);
    if steps.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut stats = UpdateStats::default();
    let mut count = 0.0;
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut steps);
        for chunk in steps.chunks(cfg.minibatch) {
            ac.policy.zero_grad();
            let (obj, ratio) = ppo_objective(&mut ac.policy, batch, adv, chunk, cfg.clip, cfg.entropy_coef)?;
            for p in ac.policy.params_mut() {
                p.scale_grads(-1.0);
            }
            clip_grad_norm(&mut ac.policy.params_mut(), cfg.max_grad_norm);
            ac.policy_opt.step(&mut ac.policy)?;

            ac.critic.net.params.zero_grad();
            let closs = critic_loss(&mut ac.critic, batch, targets, chunk)?;
            clip_grad_norm(&mut [&mut ac.critic.net.params], cfg.max_grad_norm);
            ac.critic_opt.step(&mut ac.critic.net.params)?;

            stats.objective += obj;
            stats.critic_loss += closs;
            stats.mean_ratio += ratio;
            count += 1.0;
        }
    }
    stats.objective /= count;
    stats.critic_loss /= count;
    stats.mean_ratio /= count;
    Ok(stats)
}

/// Minibatch epochs of the clipped objective alone, for methods that
/// estimate advantages without a critic.
pub fn policy_update(
    policy: &mut Policy,
    opt: &mut PolicyOptimizer,
    batch: &RolloutBatch,
    adv: &[Vec<f64>],
    cfg: &PpoConfig,
    rng: &mut Rng,
) -> Result<UpdateStats> {
    let mut steps = all_steps(batch);
    if steps.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut stats = UpdateStats {
        critic_loss: f64::NAN,
        ..Default::default()
    };
    let mut count = 0.0;
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut steps);
        for chunk in steps.chunks(cfg.minibatch) {
            policy.zero_grad();
            let (obj, ratio) = ppo_objective(policy, batch, adv, chunk, cfg.clip, cfg.entropy_coef)?;
            for p in policy.params_mut() {
                p.scale_grads(-1.0);
            }
            clip_grad_norm(&mut policy.params_mut(), cfg.max_grad_norm);
            opt.step(policy)?;
            stats.objective += obj;
            stats.mean_ratio += ratio;
            count += 1.0;
        }
    }
    stats.objective /= count;
    stats.mean_ratio /= count;
    Ok(stats)
}

/// One policy/critic update from a rollout with learned vector rewards:
/// advantages through `rho_hat`, critic regressed on vector returns-to-go.
pub fn inner_update(
    ac: &mut ActorCritic,
    batch: &RolloutBatch,
    rho_hat: &RhoHat,
    cfg: &PpoConfig,
    rng: &mut Rng,
) -> Result<UpdateStats> {
    let mut adv = advantages(batch, rho_hat, cfg.gamma, cfg.advantage_mode)?;
    if cfg.normalize_advantages {
        normalize_advantages(&mut adv);
    }
    let targets: Vec<Vec<Vec<f64>>> = batch.rollouts.iter().map(|r| r.returns_to_go(cfg.gamma)).collect();
    ppo_update(ac, batch, &adv, &targets, cfg, rng)
}

/// Scalar λ-return advantages and value targets. Episodes end without
/// bootstrapping. Rewards and values must be one-dimensional.
pub fn gae(batch: &RolloutBatch, gamma: f64, lambda: f64) -> Result<(Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>)> {
    let mut adv = Vec::with_capacity(batch.rollouts.len());
    let mut targets = Vec::with_capacity(batch.rollouts.len());
    for r in &batch.rollouts {
        check_dim("critic values", r.len(), r.values.len())?;
        let len = r.len();
        let mut a = vec![0.0; len];
        let mut acc = 0.0;
        for t in (0..len).rev() {
            check_dim("scalar reward", 1, r.rewards[t].len())?;
            check_dim("scalar value", 1, r.values[t].len())?;
            let next = if t + 1 < len { r.values[t + 1][0] } else { 0.0 };
            let delta = r.rewards[t][0] + gamma * next - r.values[t][0];
            acc = delta + gamma * lambda * acc;
            a[t] = acc;
        }
        targets.push(a.iter().zip(&r.values).map(|(x, v)| vec![x + v[0]]).collect());
        adv.push(a);
    }
    Ok((adv, targets))
}

/// Standard scalar PPO update with λ-return advantages.
pub fn scalar_ppo_update(ac: &mut ActorCritic, batch: &RolloutBatch, cfg: &PpoConfig, rng: &mut Rng) -> Result<UpdateStats> {
    let (mut adv, targets) = gae(batch, cfg.gamma, cfg.gae_lambda)?;
    if cfg.normalize_advantages {
        normalize_advantages(&mut adv);
    }
    ppo_update(ac, batch, &adv, &targets, cfg, rng)
}
