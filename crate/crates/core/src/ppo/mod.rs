//! Policy optimization: the PPO variant driven by learned vector rewards and
//! the standard scalar PPO used by baselines.

mod advantage;
mod policy;
mod rollout;
mod update;

pub use advantage::{advantages, normalize_advantages, AdvantageMode};
pub use policy::{clip_to_box, Policy, PolicyEval, PolicyOptimizer};
pub use rollout::{collect_rollout, collect_rollout_observed, RewardFn, Rollout, RolloutBatch, RolloutSize, VectorCritic};
pub use update::{
    all_steps, clip_ratio, critic_loss, gae, inner_update, policy_update, ppo_objective, ppo_update, scalar_ppo_update,
    ActorCritic, PpoConfig, StepRef, UpdateStats,
};
