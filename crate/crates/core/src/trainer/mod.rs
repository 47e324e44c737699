//! Training runs: configuration, the outer reward-learning loop with the
//! optimistic policy update, evaluation and logs.

mod config;
mod eval;
mod log;
mod lr4gpm;

pub use config::{standard_ppo_defaults, AlgoConfig, Method, RunConfig, RunSettings, ENV_NAMES};
pub use eval::{evaluate_policy, policy_set, random_set};
pub use log::{InnerRecord, IterationRecord, TrainLog};
pub use lr4gpm::{argmax_first, optimistic_policy_update, LearnedReward, OptimisticUpdate};

pub(crate) use lr4gpm::Session;

use crate::error::Result;

/// Run the training procedure selected by `cfg.algo.method`.
pub fn run(cfg: &RunConfig) -> Result<TrainLog> {
    match cfg.algo.method {
        Method::Lr4gpm | Method::ScalarRewardLearning | Method::SeparateComponent => lr4gpm::run_reward_learning(cfg),
        Method::GroundTruthPpo => crate::baselines::run_ground_truth_ppo(cfg),
        Method::ReinforceDirect => crate::baselines::run_reinforce_direct(cfg),
        Method::QFunctionApprox => crate::baselines::run_q_approx(cfg),
        Method::RewardPlusGamma => crate::baselines::run_reward_gamma(cfg),
    }
}
