use std::time::Instant;

use rayon::prelude::*;

use crate::buffer::ReplayBuffer;
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::metric::{eval_metric, MetricSpec, PolyAggregator, RhoHat};
use crate::nn::{clip_grad_norm, AdamState};
use crate::ppo::{collect_rollout, inner_update, ActorCritic, Policy, PpoConfig, RolloutSize, UpdateStats, VectorCritic};
use crate::reward::{mixed_reward, optimistic_sample, reward_loss, FitMode, RewardLossConfig, RewardNet, TargetRewardNet};
use crate::rng::Rng;
use crate::trajectory::{Action, TrajectorySet};

use super::config::{Method, RunConfig};
use super::eval::{evaluate_policy, policy_set, random_set};
use super::log::{InnerRecord, IterationRecord, TrainLog};

/// Training reward: a mix of the online and target reward networks.
#[derive(Clone, Copy, Debug)]
pub struct LearnedReward<'a> {
    pub online: &'a RewardNet,
    pub target: &'a RewardNet,
    pub mix: f64,
}

impl LearnedReward<'_> {
    pub fn reward(&self, state: &[f64], action: &Action) -> Result<Vec<f64>> {
        mixed_reward(self.online, self.target, self.mix, state, action)
    }
}

/// Outcome of [`optimistic_policy_update`].
#[derive(Clone, Debug)]
pub struct OptimisticUpdate {
    /// Index of the selected candidate.
    pub best: usize,
    /// True-metric score of every candidate.
    pub scores: Vec<f64>,
    pub stats: Vec<UpdateStats>,
    pub env_steps: u64,
}

/// Argmax with ties resolved to the lowest index.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Train `m` candidates from the same starting point, each on its own
/// rollout, score each on a fresh set of `eval_episodes` episodes with the
/// true metric, and keep the best. Candidates run in parallel with
/// independent random streams; the result does not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn optimistic_policy_update(
    ac: &mut ActorCritic,
    m: usize,
    env: &dyn Env,
    spec: &MetricSpec,
    reward: LearnedReward<'_>,
    rho_hat: &RhoHat,
    ppo: &PpoConfig,
    rollout: RolloutSize,
    eval_episodes: usize,
    rng: &mut Rng,
) -> Result<OptimisticUpdate> {
    if m == 0 {
        return Err(Error::Config("the optimistic update needs at least one candidate".into()));
    }
    let mut jobs = Vec::with_capacity(m);
    for _ in 0..m {
        let env = env
            .snapshot()
            .ok_or_else(|| Error::Unsupported("optimistic update needs an environment that can be copied".into()))?;
        jobs.push((env, rng.fork()));
    }
    let start: &ActorCritic = ac;
    let results: Vec<Result<(ActorCritic, f64, UpdateStats, u64)>> = jobs
        .into_par_iter()
        .map(|(mut env, mut rng)| {
            let mut cand = start.clone();
            let batch = collect_rollout(
                env.as_mut(),
                &cand.policy,
                Some(&cand.critic),
                &mut |s, a, _| reward.reward(s, a),
                rollout,
                &mut rng,
            )?;
            let stats = inner_update(&mut cand, &batch, rho_hat, ppo, &mut rng)?;
            let set = policy_set(env.as_mut(), &cand.policy, eval_episodes, false, &mut rng, "candidate")?;
            let score = eval_metric(spec, env.as_ref(), &set)?;
            Ok((cand, score, stats, (batch.steps() + set.total_steps()) as u64))
        })
        .collect();
    let mut cands = Vec::with_capacity(m);
    let mut scores = Vec::with_capacity(m);
    let mut stats = Vec::with_capacity(m);
    let mut env_steps = 0;
    for r in results {
        let (c, s, st, n) = r?;
        cands.push(c);
        scores.push(s);
        stats.push(st);
        env_steps += n;
    }
    let best = argmax_first(&scores);
    *ac = cands.swap_remove(best);
    Ok(OptimisticUpdate {
        best,
        scores,
        stats,
        env_steps,
    })
}

/// How the reward model of a run is set up.
pub(crate) struct Variant {
    pub reward_dim: usize,
    pub rho_hat: RhoHat,
    pub fit: FitMode,
    pub lambda_rd: f64,
}

impl Variant {
    pub fn for_config(cfg: &RunConfig) -> Result<Self> {
        let d = cfg.reward_dim();
        Ok(match cfg.algo.method {
            Method::ScalarRewardLearning => Variant {
                reward_dim: 1,
                rho_hat: RhoHat::Pinned(MetricSpec::Identity),
                fit: FitMode::Aggregated,
                lambda_rd: 0.0,
            },
            Method::SeparateComponent => Variant {
                reward_dim: d,
                rho_hat: RhoHat::Pinned(cfg.metric.clone()),
                fit: FitMode::PerComponent,
                lambda_rd: 0.0,
            },
            _ => {
                let rho_hat = if cfg.algo.pin_rho_hat {
                    if d != cfg.metric.nu_dim() {
                        return Err(Error::Config(format!(
                            "pin_rho_hat needs reward_dim = {} (the dimension of ν), got {d}",
                            cfg.metric.nu_dim()
                        )));
                    }
                    RhoHat::Pinned(cfg.metric.clone())
                } else {
                    RhoHat::Poly(PolyAggregator::new(d, cfg.algo.rho_hat_degree)?)
                };
                Variant {
                    reward_dim: d,
                    rho_hat,
                    fit: FitMode::Aggregated,
                    lambda_rd: cfg.algo.lambda_rd,
                }
            }
        })
    }
}

/// Shared bookkeeping of every training procedure.
pub(crate) struct Session {
    pub cfg: RunConfig,
    pub env: Box<dyn Env>,
    pub rng: Rng,
    eval_rng: Rng,
    pub steps: u64,
    pub log: TrainLog,
    start: Instant,
}

impl Session {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        Self::with_env(cfg, cfg.env.build()?)
    }

    /// Session on an environment that is not described by `cfg.env`.
    pub fn with_env(cfg: &RunConfig, env: Box<dyn Env>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            env,
            rng: Rng::new(cfg.run.seed),
            eval_rng: Rng::with_stream(cfg.run.seed, 1),
            steps: 0,
            log: TrainLog::new(cfg.algo.method, cfg.run.seed),
            start: Instant::now(),
            cfg: cfg.clone(),
        })
    }

    pub fn budget_left(&self) -> bool {
        self.cfg.run.max_env_steps.is_none_or(|max| self.steps < max)
    }

    pub fn evaluate(&mut self, policy: &Policy) -> Result<f64> {
        let r = &self.cfg.run;
        evaluate_policy(
            policy,
            self.env.as_mut(),
            &self.cfg.metric,
            r.eval_sets,
            self.cfg.algo.set_size,
            r.greedy_eval,
            &mut self.eval_rng,
        )
    }

    pub fn push(&mut self, mut record: IterationRecord) {
        if self.cfg.run.record_wall_time {
            record.wall_ms = self.start.elapsed().as_millis() as u64;
        }
        self.log.records.push(record);
    }

    pub fn new_actor_critic(&mut self, critic_dim: usize) -> Result<ActorCritic> {
        let spec = self.env.spec();
        let p = &self.cfg.ppo;
        let policy = Policy::new(spec.state_dim, spec.action_kind, &p.hidden, p.activation, &mut self.rng)?;
        let critic = VectorCritic::new(spec.state_dim, critic_dim, &p.hidden, p.activation, &mut self.rng)?;
        Ok(ActorCritic::new(policy, critic, p))
    }
}

/// Reward learning with the extended PPO; also serves the scalar and
/// per-component reward-learning baselines.
pub(crate) fn run_reward_learning(cfg: &RunConfig) -> Result<TrainLog> {
    let mut sess = Session::new(cfg)?;
    let Variant {
        reward_dim,
        mut rho_hat,
        fit,
        lambda_rd,
    } = Variant::for_config(cfg)?;
    let algo = cfg.algo.clone();
    let ppo = cfg.ppo.clone();
    let spec = sess.env.spec();

    let mut ac = sess.new_actor_critic(reward_dim)?;
    let mut online = RewardNet::new(
        spec.state_dim,
        spec.action_kind,
        reward_dim,
        &algo.reward_hidden,
        ppo.activation,
        &mut sess.rng,
    )?;
    let mut target = TargetRewardNet::new(&online, algo.target_mix, algo.copy_interval)?;
    let mut reward_opt = AdamState::new(online.params().len(), algo.lr_reward);
    let mut rho_opt = rho_hat.params_mut().map(|p| AdamState::new(p.len(), algo.lr_reward));
    let loss_cfg = RewardLossConfig {
        gamma: ppo.gamma,
        diversity: algo.diversity,
        lambda_rd,
        fit,
    };

    let mut buffer = ReplayBuffer::new(algo.buffer_capacity)?;
    for _ in 0..cfg.warmup_sets() {
        let set = random_set(sess.env.as_mut(), algo.set_size, &mut sess.rng)?;
        sess.steps += set.total_steps() as u64;
        buffer.push(set)?;
    }
    let score = sess.evaluate(&ac.policy)?;
    let mut rec = IterationRecord::new(0, sess.steps, score);
    rec.buffer_size = buffer.len();
    sess.push(rec);

    let rollout = RolloutSize::Steps(ppo.rollout_steps);
    let candidate_rollout = RolloutSize::Steps(algo.candidate_steps.unwrap_or(ppo.rollout_steps));
    for iter in 1..=algo.outer_iterations {
        if !sess.budget_left() {
            break;
        }
        // The target lags the online network by one round of reward updates.
        target.sync(&online, iter - 1)?;

        let sample = optimistic_sample(
            &buffer,
            algo.batch_sets,
            algo.extra_sets,
            &cfg.metric,
            sess.env.as_ref(),
            &mut sess.rng,
        )?;
        let kept = sample.kept_sets();
        let owned: Vec<Option<TrajectorySet>> = kept
            .iter()
            .map(|s| (s.len() > algo.set_size).then(|| s.subsample(algo.set_size, &mut sess.rng)))
            .collect();
        let batch: Vec<&TrajectorySet> = kept.iter().zip(&owned).map(|(s, o)| o.as_ref().unwrap_or(s)).collect();
        let (mut loss_sum, mut div_sum) = (0.0, 0.0);
        for _ in 0..algo.reward_updates {
            online.params_mut().zero_grad();
            if let Some(p) = rho_hat.params_mut() {
                p.zero_grad();
            }
            let out = reward_loss(&mut online, &mut rho_hat, &batch, &cfg.metric, sess.env.as_ref(), &loss_cfg)?;
            loss_sum += out.loss;
            div_sum += out.diversity;
            match rho_hat.params_mut() {
                Some(p) => clip_grad_norm(&mut [online.params_mut(), p], algo.reward_max_grad_norm),
                None => clip_grad_norm(&mut [online.params_mut()], algo.reward_max_grad_norm),
            };
            reward_opt.step(online.params_mut())?;
            if let (Some(opt), Some(p)) = (rho_opt.as_mut(), rho_hat.params_mut()) {
                opt.step(p)?;
            }
        }
        drop(owned);

        let learned = LearnedReward {
            online: &online,
            target: &target.net,
            mix: target.mix_weight,
        };
        for _ in 0..algo.inner_updates {
            let batch = collect_rollout(
                sess.env.as_mut(),
                &ac.policy,
                Some(&ac.critic),
                &mut |s, a, _| learned.reward(s, a),
                rollout,
                &mut sess.rng,
            )?;
            sess.steps += batch.steps() as u64;
            let st = inner_update(&mut ac, &batch, &rho_hat, &ppo, &mut sess.rng)?;
            sess.log.inner.push(InnerRecord {
                outer_iteration: iter,
                objective: st.objective,
                critic_loss: st.critic_loss,
                mean_ratio: st.mean_ratio,
            });
        }
        let upd = optimistic_policy_update(
            &mut ac,
            algo.candidates,
            sess.env.as_ref(),
            &cfg.metric,
            learned,
            &rho_hat,
            &ppo,
            candidate_rollout,
            algo.set_size,
            &mut sess.rng,
        )?;
        sess.steps += upd.env_steps;
        let best = upd.stats[upd.best];
        sess.log.inner.push(InnerRecord {
            outer_iteration: iter,
            objective: best.objective,
            critic_loss: best.critic_loss,
            mean_ratio: best.mean_ratio,
        });

        let fresh = policy_set(
            sess.env.as_mut(),
            &ac.policy,
            algo.push_trajectories,
            false,
            &mut sess.rng,
            format!("iter{iter}").as_str(),
        )?;
        sess.steps += fresh.total_steps() as u64;
        buffer.push(fresh)?;

        let score = sess.evaluate(&ac.policy)?;
        let n = algo.reward_updates.max(1) as f64;
        let mut rec = IterationRecord::new(iter, sess.steps, score);
        rec.reward_loss = loss_sum / n;
        rec.diversity_term = div_sum / n;
        rec.ppo_objective = best.objective;
        rec.critic_loss = best.critic_loss;
        rec.mean_ratio = best.mean_ratio;
        rec.buffer_size = buffer.len();
        sess.push(rec);
    }
    Ok(sess.log)
}
