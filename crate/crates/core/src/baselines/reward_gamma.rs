use crate::buffer::ReplayBuffer;
use crate::envs::TrajectoryEval;
use crate::error::{check_dim, Error, Result};
use crate::metric::{mean_nu, MetricSpec, RhoHat};
use crate::nn::{clip_grad_norm, AdamState, ParamVector};
use crate::ppo::{collect_rollout, inner_update, PpoConfig, RolloutSize};
use crate::reward::{optimistic_sample, RewardNet};
use crate::trainer::{policy_set, random_set, InnerRecord, IterationRecord, RunConfig, Session, TrainLog};
use crate::trajectory::TrajectorySet;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-timestep discounts `γ_t = sigmoid(η_t)`.
pub fn discounts(eta: &ParamVector) -> Vec<f64> {
    eta.values.iter().map(|e| sigmoid(*e)).collect()
}

/// `mean over sets of ((1/N) Σ_i Σ_t γ_t^t R(s_t, a_t) − ρ(mean ν))²`.
///
/// Accumulates the gradient with respect to the reward network into `net`
/// and returns the loss with `∂loss/∂γ_t`.
pub fn reward_gamma_loss(
    net: &mut RewardNet,
    gammas: &[f64],
    batch: &[&TrajectorySet],
    spec: &MetricSpec,
    eval: &dyn TrajectoryEval,
) -> Result<(f64, Vec<f64>)> {
    check_dim("scalar reward", 1, net.dim())?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n_b = batch.len() as f64;
    let mut loss = 0.0;
    let mut g_gamma = vec![0.0; gammas.len()];
    for set in batch {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        let n = set.len() as f64;
        let mut pred = 0.0;
        let mut rewards = Vec::with_capacity(set.len());
        for traj in &set.trajectories {
            if traj.len() > gammas.len() {
                return Err(Error::Dimension {
                    context: "per-timestep discounts",
                    expected: traj.len(),
                    got: gammas.len(),
                });
            }
            let mut rs = Vec::with_capacity(traj.len());
            for (t, (s, a)) in traj.states.iter().zip(&traj.actions).enumerate() {
                let r = net.reward_vec(s, a)?[0];
                pred += gammas[t].powi(t as i32) * r / n;
                rs.push(r);
            }
            rewards.push(rs);
        }
        let err = pred - spec.rho(&mean_nu(spec, eval, set)?)?;
        loss += err * err / n_b;
        let c = 2.0 * err / n_b / n;
        for (traj, rs) in set.trajectories.iter().zip(&rewards) {
            for (t, ((s, a), r)) in traj.states.iter().zip(&traj.actions).zip(rs).enumerate() {
                let w = gammas[t].powi(t as i32);
                let x = net.encode(s, a)?;
                net.net.backward_from_input(&x, &[c * w])?;
                if t > 0 {
                    g_gamma[t] += c * r * t as f64 * gammas[t].powi(t as i32 - 1);
                }
            }
        }
    }
    Ok((loss, g_gamma))
}

/// Add `∂loss/∂η` to the accumulated gradients of `eta`.
fn accumulate_eta_grad(eta: &mut ParamVector, g_gamma: &[f64]) {
    for ((g, v), gg) in eta.grads.iter_mut().zip(&eta.values).zip(g_gamma) {
        let s = sigmoid(*v);
        *g += gg * s * (1.0 - s);
    }
}

/// Scalar reward with learned per-timestep discounts, regressed on the
/// true metric of buffer sets; the policy maximizes `Σ_t γ_t^t R`.
pub fn run_reward_gamma(cfg: &RunConfig) -> Result<TrainLog> {
    let mut sess = Session::new(cfg)?;
    let algo = cfg.algo.clone();
    let spec = sess.env.spec();
    let mut ac = sess.new_actor_critic(1)?;
    let mut net = RewardNet::new(
        spec.state_dim,
        spec.action_kind,
        1,
        &algo.reward_hidden,
        cfg.ppo.activation,
        &mut sess.rng,
    )?;
    let g0 = cfg.ppo.gamma.clamp(0.5, 0.999);
    let mut eta = ParamVector::from_values(vec![(g0 / (1.0 - g0)).ln(); spec.horizon]);
    let mut net_opt = AdamState::new(net.params().len(), algo.lr_reward);
    let mut eta_opt = AdamState::new(eta.len(), algo.lr_reward);
    // The discounts are already inside the per-step rewards.
    let ppo = PpoConfig {
        gamma: 1.0,
        ..cfg.ppo.clone()
    };
    let identity = RhoHat::Pinned(MetricSpec::Identity);

    let mut buffer = ReplayBuffer::new(algo.buffer_capacity)?;
    for _ in 0..cfg.warmup_sets() {
        let set = random_set(sess.env.as_mut(), algo.set_size, &mut sess.rng)?;
        sess.steps += set.total_steps() as u64;
        buffer.push(set)?;
    }
    let score = sess.evaluate(&ac.policy)?;
    sess.push(IterationRecord::new(0, sess.steps, score));

    for iter in 1..=algo.outer_iterations {
        if !sess.budget_left() {
            break;
        }
        let sample = optimistic_sample(&buffer, algo.batch_sets, 0, &cfg.metric, sess.env.as_ref(), &mut sess.rng)?;
        let kept = sample.kept_sets();
        let mut loss_sum = 0.0;
        for _ in 0..algo.reward_updates {
            net.params_mut().zero_grad();
            eta.zero_grad();
            let (loss, g_gamma) = reward_gamma_loss(&mut net, &discounts(&eta), &kept, &cfg.metric, sess.env.as_ref())?;
            accumulate_eta_grad(&mut eta, &g_gamma);
            clip_grad_norm(&mut [net.params_mut(), &mut eta], algo.reward_max_grad_norm);
            net_opt.step(net.params_mut())?;
            eta_opt.step(&mut eta)?;
            loss_sum += loss;
        }

        let gammas = discounts(&eta);
        let mut last = None;
        for _ in 0..algo.inner_updates {
            let mut batch = collect_rollout(
                sess.env.as_mut(),
                &ac.policy,
                Some(&ac.critic),
                &mut |s, a, _| net.reward_vec(s, a),
                RolloutSize::Steps(cfg.ppo.rollout_steps),
                &mut sess.rng,
            )?;
            sess.steps += batch.steps() as u64;
            for r in &mut batch.rollouts {
                for (t, rw) in r.rewards.iter_mut().enumerate() {
                    rw[0] *= gammas[t].powi(t as i32);
                }
            }
            let st = inner_update(&mut ac, &batch, &identity, &ppo, &mut sess.rng)?;
            sess.log.inner.push(InnerRecord {
                outer_iteration: iter,
                objective: st.objective,
                critic_loss: st.critic_loss,
                mean_ratio: st.mean_ratio,
            });
            last = Some(st);
        }

        let fresh = policy_set(
            sess.env.as_mut(),
            &ac.policy,
            algo.push_trajectories,
            false,
            &mut sess.rng,
            "fresh",
        )?;
        sess.steps += fresh.total_steps() as u64;
        buffer.push(fresh)?;

        let score = sess.evaluate(&ac.policy)?;
        let mut rec = IterationRecord::new(iter, sess.steps, score);
        rec.reward_loss = loss_sum / algo.reward_updates.max(1) as f64;
        if let Some(st) = last {
            rec.ppo_objective = st.objective;
            rec.critic_loss = st.critic_loss;
            rec.mean_ratio = st.mean_ratio;
        }
        rec.buffer_size = buffer.len();
        sess.push(rec);
    }
    Ok(sess.log)
}
