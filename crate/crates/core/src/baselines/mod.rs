//! Comparison methods that share the environments, networks and PPO code
//! with the main algorithm. Scalar and per-component reward learning are
//! configurations of the main training loop and live in [`crate::trainer`].

mod ground_truth;
mod q_approx;
mod reinforce;
mod reward_gamma;

pub use ground_truth::run_ground_truth_ppo;
pub use q_approx::{fit_q, q_target, run_q_approx, QSample};
pub use reinforce::{reinforce_baseline, reinforce_gradient, run_reinforce_direct};
pub use reward_gamma::{discounts, reward_gamma_loss, run_reward_gamma};
