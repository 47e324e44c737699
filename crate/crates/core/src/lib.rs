//! Reinforcement learning toward global performance metrics.
//!
//! A policy is trained to maximize `ρ(E[ν(τ)])`, where `ν` maps a whole
//! trajectory to a vector of statistics and `ρ` aggregates their expectation.
//! No per-step reward is given: a vector reward network and a polynomial
//! surrogate of `ρ` are learned jointly from a replay buffer of trajectory
//! sets, and the policy is optimized with a PPO variant whose advantage passes
//! batch-mean vector returns through the learned aggregator.

pub mod baselines;
pub mod buffer;
pub mod envs;
pub mod error;
pub mod metric;
pub mod nn;
pub mod ppo;
pub mod reward;
pub mod rng;
pub mod trainer;
pub mod trajectory;
pub mod vecmath;

pub use buffer::ReplayBuffer;
pub use error::{Error, Result};
pub use rng::Rng;
pub use trainer::{run, Method, RunConfig, TrainLog};
pub use trajectory::{Action, DoneReason, Trajectory, TrajectorySet};
