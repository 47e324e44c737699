use serde::{Deserialize, Serialize};

use crate::envs::{DriveLoopConfig, EnvConfig, PointGoalConfig, QueueNetConfig};
use crate::error::{Error, Result};
use crate::metric::MetricSpec;
use crate::ppo::PpoConfig;
use crate::reward::DiversityKind;

/// Training procedure selected by a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Learned vector reward and polynomial aggregator with the extended PPO.
    #[default]
    Lr4gpm,
    /// Scalar PPO on the environment's own per-step reward.
    GroundTruthPpo,
    /// One learned scalar reward whose expected return approximates the metric.
    ScalarRewardLearning,
    /// One learned reward component per component of ν.
    SeparateComponent,
    /// Score-function gradient directly on the metric of sampled sets.
    ReinforceDirect,
    /// Q-function regressed on the metric of rollouts started from `(s, a)`.
    QFunctionApprox,
    /// Scalar reward with learned per-timestep discounts.
    RewardPlusGamma,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lr4gpm => "lr4gpm",
            Method::GroundTruthPpo => "ground_truth_ppo",
            Method::ScalarRewardLearning => "scalar_reward_learning",
            Method::SeparateComponent => "separate_component",
            Method::ReinforceDirect => "reinforce_direct",
            Method::QFunctionApprox => "q_function_approx",
            Method::RewardPlusGamma => "reward_plus_gamma",
        }
    }
}

/// Reward-learning and outer-loop settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgoConfig {
    pub method: Method,
    /// Outer iterations N.
    pub outer_iterations: usize,
    /// Sets per reward minibatch, n_B.
    pub batch_sets: usize,
    /// Extra sets scored and discarded by optimistic sampling, K.
    pub extra_sets: usize,
    /// Trajectories per set, n_τ. Also the size of evaluation sets.
    pub set_size: usize,
    /// Trajectories generated by the selected policy and pushed as one set, n_E.
    pub push_trajectories: usize,
    /// Candidate policies in the optimistic policy update, m.
    pub candidates: usize,
    /// Steps in each candidate's training rollout; defaults to the PPO rollout size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_steps: Option<usize>,
    /// Regular PPO updates per outer iteration before the optimistic update.
    pub inner_updates: usize,
    /// Replay buffer capacity in sets.
    pub buffer_capacity: usize,
    /// Sets generated by the uniform-random policy before training;
    /// defaults to `max(4, batch_sets + extra_sets)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup_sets: Option<usize>,
    /// Reward-network and aggregator learning rate, l_r.
    pub lr_reward: f64,
    pub reward_hidden: Vec<usize>,
    /// Reward dimension D; defaults to the dimension of ν.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward_dim: Option<usize>,
    /// Adam steps on each sampled reward minibatch.
    pub reward_updates: usize,
    pub lambda_rd: f64,
    pub diversity: DiversityKind,
    /// Weight of the target network in the training reward, α_tgt.
    pub target_mix: f64,
    /// Outer iterations between target-network copies.
    pub copy_interval: usize,
    pub rho_hat_degree: u32,
    /// Use the true aggregator instead of learning a polynomial.
    pub pin_rho_hat: bool,
    /// Gradient-norm cap for reward updates; 0 disables clipping.
    pub reward_max_grad_norm: f64,
    /// Rollouts per Q-function target.
    pub q_rollouts: usize,
    /// Visited states per iteration that receive a Q-function target.
    pub q_states: usize,
    /// Full-batch Q-regression steps per iteration.
    pub q_fit_steps: usize,
    /// Sets per REINFORCE update.
    pub reinforce_sets: usize,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            method: Method::Lr4gpm,
            outer_iterations: 100,
            batch_sets: 32,
            extra_sets: 10,
            set_size: 32,
            push_trajectories: 10,
            candidates: 8,
            candidate_steps: None,
            inner_updates: 1,
            buffer_capacity: 64,
            warmup_sets: None,
            lr_reward: 0.008,
            reward_hidden: vec![64, 64],
            reward_dim: None,
            reward_updates: 5,
            lambda_rd: 0.0,
            diversity: DiversityKind::SquaredL2,
            target_mix: 0.5,
            copy_interval: 1,
            rho_hat_degree: 2,
            pin_rho_hat: false,
            reward_max_grad_norm: 10.0,
            q_rollouts: 8,
            q_states: 16,
            q_fit_steps: 50,
            reinforce_sets: 4,
        }
    }
}

/// Seed, evaluation and budget settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub seed: u64,
    /// Sets averaged by each evaluation.
    pub eval_sets: usize,
    /// Stop starting new outer iterations once this many training
    /// environment steps were used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_env_steps: Option<u64>,
    /// Evaluate the mode of the policy instead of sampling from it.
    pub greedy_eval: bool,
    /// Record wall-clock time per iteration. Off by default so that logs are
    /// reproducible byte for byte.
    pub record_wall_time: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            eval_sets: 5,
            max_env_steps: None,
            greedy_eval: false,
            record_wall_time: false,
        }
    }
}

/// Everything a training run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub metric: MetricSpec,
    #[serde(default)]
    pub algo: AlgoConfig,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub run: RunSettings,
}

pub const ENV_NAMES: [&str; 3] = ["pointgoal", "queuenet", "driveloop"];

impl RunConfig {
    /// Default configuration for a bundled environment. `pointgoal` follows
    /// the Hopper column of the reference hyperparameter table, `queuenet`
    /// the Iroko column and `driveloop` the SMARTS column; network widths of
    /// the reward net are scaled down for `driveloop`.
    pub fn defaults(env: &str) -> Result<Self> {
        match env {
            "pointgoal" => Ok(Self {
                env: EnvConfig::PointGoal(PointGoalConfig::default()),
                metric: MetricSpec::Identity,
                algo: AlgoConfig::default(),
                ppo: PpoConfig::default(),
                run: RunSettings::default(),
            }),
            "queuenet" => Ok(Self {
                env: EnvConfig::QueueNet(QueueNetConfig::default()),
                metric: MetricSpec::QueueNet { delta: 1.0 },
                algo: AlgoConfig {
                    lr_reward: 0.003,
                    batch_sets: 32,
                    buffer_capacity: 1024,
                    extra_sets: 10,
                    set_size: 32,
                    lambda_rd: 0.2,
                    candidates: 16,
                    push_trajectories: 10,
                    ..AlgoConfig::default()
                },
                ppo: PpoConfig {
                    lr_actor: 0.00008,
                    lr_critic: 0.0008,
                    hidden: vec![128, 128],
                    rollout_steps: 1024,
                    epochs: 5,
                    minibatch: 64,
                    gamma: 0.999,
                    gae_lambda: 0.98,
                    clip: 0.2,
                    entropy_coef: 0.0001,
                    ..PpoConfig::default()
                },
                run: RunSettings::default(),
            }),
            "driveloop" => Ok(Self {
                env: EnvConfig::DriveLoop(DriveLoopConfig::default()),
                metric: MetricSpec::drive_default(),
                algo: AlgoConfig {
                    lr_reward: 0.0051,
                    reward_hidden: vec![64, 64],
                    batch_sets: 64,
                    buffer_capacity: 2048,
                    extra_sets: 20,
                    set_size: 50,
                    lambda_rd: 0.43,
                    candidates: 16,
                    push_trajectories: 20,
                    ..AlgoConfig::default()
                },
                ppo: PpoConfig {
                    lr_actor: 0.0001,
                    lr_critic: 0.0003,
                    hidden: vec![128, 128],
                    rollout_steps: 4096,
                    epochs: 5,
                    minibatch: 128,
                    gamma: 0.99,
                    gae_lambda: 0.99,
                    clip: 0.4,
                    entropy_coef: 0.00001,
                    ..PpoConfig::default()
                },
                run: RunSettings::default(),
            }),
            other => Err(Error::Config(format!(
                "unknown environment `{other}` (expected one of {})",
                ENV_NAMES.join(", ")
            ))),
        }
    }

    /// Rejects inconsistent settings, including learning rates that violate
    /// `lr_reward >= lr_critic >= lr_actor`.
    pub fn validate(&self) -> Result<()> {
        let (l_r, l_c, l_a) = (self.algo.lr_reward, self.ppo.lr_critic, self.ppo.lr_actor);
        if !(l_r >= l_c && l_c >= l_a) {
            return Err(Error::LearningRateOrder { l_r, l_c, l_a });
        }
        self.ppo.validate()?;
        self.metric.validate()?;
        let a = &self.algo;
        let counts = [
            ("batch_sets", a.batch_sets),
            ("set_size", a.set_size),
            ("push_trajectories", a.push_trajectories),
            ("candidates", a.candidates),
            ("buffer_capacity", a.buffer_capacity),
            ("copy_interval", a.copy_interval),
            ("q_rollouts", a.q_rollouts),
            ("q_states", a.q_states),
            ("q_fit_steps", a.q_fit_steps),
            ("reinforce_sets", a.reinforce_sets),
            ("eval_sets", self.run.eval_sets),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("`{name}` must be positive")));
        }
        if a.reward_dim == Some(0) || a.candidate_steps == Some(0) || a.warmup_sets == Some(0) {
            return Err(Error::Config(
                "reward_dim, candidate_steps and warmup_sets must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&a.target_mix) {
            return Err(Error::Config("target_mix must lie in [0, 1]".into()));
        }
        if a.lambda_rd < 0.0 || a.lr_reward <= 0.0 {
            return Err(Error::Config("lambda_rd must be non-negative and lr_reward positive".into()));
        }
        // Risk-sensitive metrics exponentiate the first component of ν.
        let nu_dim = self.env.build()?.nu_dim();
        let matches = match self.metric {
            MetricSpec::RiskSensitive { .. } => nu_dim >= 1,
            _ => self.metric.nu_dim() == nu_dim,
        };
        if !matches {
            return Err(Error::Config(format!(
                "metric expects {}-dimensional ν but the {} environment produces {nu_dim}",
                self.metric.nu_dim(),
                self.env.name()
            )));
        }
        Ok(())
    }

    pub fn reward_dim(&self) -> usize {
        match self.algo.method {
            Method::ScalarRewardLearning | Method::RewardPlusGamma => 1,
            Method::SeparateComponent => self.metric.nu_dim(),
            _ => self.algo.reward_dim.unwrap_or(self.metric.nu_dim()),
        }
    }

    pub fn warmup_sets(&self) -> usize {
        self.algo
            .warmup_sets
            .unwrap_or_else(|| (self.algo.batch_sets + self.algo.extra_sets).max(4))
    }
}

/// Standard scalar PPO settings from the reference table for standard PPO.
/// `driveloop` has no column there and reuses the `queuenet` values.
pub fn standard_ppo_defaults(env: &str) -> Result<PpoConfig> {
    let base = PpoConfig::default();
    match env {
        "pointgoal" => Ok(PpoConfig {
            lr_actor: 0.0005,
            lr_critic: 0.0005,
            hidden: vec![64, 64],
            rollout_steps: 1024,
            epochs: 10,
            minibatch: 64,
            gamma: 0.99,
            gae_lambda: 0.99,
            clip: 0.2,
            entropy_coef: 0.000001,
            ..base
        }),
        "queuenet" | "driveloop" => Ok(PpoConfig {
            lr_actor: 0.0001,
            lr_critic: 0.0001,
            hidden: vec![128, 128],
            rollout_steps: 1024,
            epochs: 5,
            minibatch: 64,
            gamma: 0.999,
            gae_lambda: 0.95,
            clip: 0.2,
            entropy_coef: 0.0001,
            ..base
        }),
        other => Err(Error::Config(format!("unknown environment `{other}`"))),
    }
}
