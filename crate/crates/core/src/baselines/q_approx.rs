use crate::envs::Env;
use crate::error::{Error, Result};
use crate::metric::{mean_nu, MetricSpec};
use crate::nn::AdamState;
use crate::ppo::{
    clip_to_box, collect_rollout_observed, normalize_advantages, policy_update, Policy, PolicyOptimizer, RolloutSize,
};
use crate::reward::RewardNet;
use crate::rng::Rng;
use crate::trainer::{IterationRecord, RunConfig, Session, TrainLog};
use crate::trajectory::{Action, DoneReason, Trajectory, TrajectorySet};

/// One regression example for the Q-function.
#[derive(Clone, Debug, PartialEq)]
pub struct QSample {
    pub state: Vec<f64>,
    pub action: Action,
    pub target: f64,
}

/// `ρ(mean ν)` over `rollouts` continuations that take `action` in the
/// state held by `start` and then follow the policy for at most
/// `remaining` steps in total. Returns the target and the steps used.
#[allow(clippy::too_many_arguments)]
pub fn q_target(
    start: &dyn Env,
    state: &[f64],
    action: &Action,
    remaining: usize,
    policy: &Policy,
    spec: &MetricSpec,
    rollouts: usize,
    rng: &mut Rng,
) -> Result<(f64, u64)> {
    if rollouts == 0 || remaining == 0 {
        return Err(Error::Config("a Q target needs at least one rollout of one step".into()));
    }
    let mut tails = Vec::with_capacity(rollouts);
    let mut steps = 0u64;
    for _ in 0..rollouts {
        let mut env = start
            .snapshot()
            .ok_or_else(|| Error::Unsupported("the Q-function baseline needs an environment that can be copied".into()))?;
        let mut traj = Trajectory {
            states: Vec::with_capacity(remaining),
            actions: Vec::with_capacity(remaining),
            aux: Vec::with_capacity(remaining),
            env_rewards: Vec::with_capacity(remaining),
            done_reason: DoneReason::Horizon,
        };
        let mut s = state.to_vec();
        let mut a = action.clone();
        for k in 0..remaining {
            if k > 0 {
                a = clip_to_box(&policy.sample(&s, rng)?.0);
            }
            let step = env.step(&a)?;
            steps += 1;
            traj.states.push(std::mem::replace(&mut s, step.state));
            traj.actions.push(a.clone());
            traj.aux.push(step.aux);
            traj.env_rewards.push(step.reward);
            if step.done {
                traj.done_reason = step.done_reason.unwrap_or(DoneReason::Horizon);
                break;
            }
        }
        tails.push(traj);
    }
    let set = TrajectorySet::new(tails, "q-tail");
    Ok((spec.rho(&mean_nu(spec, start, &set)?)?, steps))
}

/// Full-batch squared-error regression of `q` on `data`; returns the loss
/// before the last step.
pub fn fit_q(q: &mut RewardNet, opt: &mut AdamState, data: &[QSample], steps: usize) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = data.len() as f64;
    let mut loss = f64::NAN;
    for _ in 0..steps {
        q.params_mut().zero_grad();
        loss = 0.0;
        for d in data {
            let x = q.encode(&d.state, &d.action)?;
            let cache = q.net.forward_cached(&x)?;
            let err = cache.output()[0] - d.target;
            loss += err * err / n;
            q.net.backward(&cache, &[2.0 * err / n])?;
        }
        opt.step(q.params_mut())?;
    }
    Ok(loss)
}

/// `E_{a∼π}[Q(s, a)]`: exact for discrete actions, a sample mean otherwise.
fn expected_q(q: &RewardNet, policy: &Policy, state: &[f64], samples: usize, rng: &mut Rng) -> Result<f64> {
    match policy.action_kind() {
        crate::envs::ActionKind::Discrete(n) => {
            let mut e = 0.0;
            for i in 0..n {
                let a = Action::Discrete(i);
                e += policy.log_prob(state, &a)?.exp() * q.reward_vec(state, &a)?[0];
            }
            Ok(e)
        }
        crate::envs::ActionKind::Continuous(_) => {
            let mut e = 0.0;
            for _ in 0..samples {
                let a = clip_to_box(&policy.sample(state, rng)?.0);
                e += q.reward_vec(state, &a)?[0];
            }
            Ok(e / samples as f64)
        }
    }
}

/// Regress a Q-function on the true metric of continuations from visited
/// state-action pairs, then improve the policy with the clipped objective
/// on `Q(s, a) − E_π Q(s, ·)`.
pub fn run_q_approx(cfg: &RunConfig) -> Result<TrainLog> {
    let mut sess = Session::new(cfg)?;
    let algo = &cfg.algo;
    let spec = sess.env.spec();
    let mut policy = sess.new_actor_critic(1)?.policy;
    let mut opt = PolicyOptimizer::new(&policy, cfg.ppo.lr_actor);
    let mut q = RewardNet::new(
        spec.state_dim,
        spec.action_kind,
        1,
        &cfg.ppo.hidden,
        cfg.ppo.activation,
        &mut sess.rng,
    )?;
    let mut q_opt = AdamState::new(q.params().len(), cfg.ppo.lr_critic);
    let score = sess.evaluate(&policy)?;
    sess.push(IterationRecord::new(0, 0, score));

    for iter in 1..=algo.outer_iterations {
        if !sess.budget_left() {
            break;
        }
        // Reservoir of (global step, step in episode, environment copy).
        let mut pick_rng = sess.rng.fork();
        let mut kept: Vec<(usize, usize, Box<dyn Env>)> = Vec::with_capacity(algo.q_states);
        let mut seen = 0usize;
        let mut observe = |env: &dyn Env, t: usize| -> Result<()> {
            let slot = if kept.len() < algo.q_states {
                Some(kept.len())
            } else {
                Some(pick_rng.below(seen + 1)).filter(|j| *j < algo.q_states)
            };
            if let Some(j) = slot {
                let snap = env.snapshot().ok_or_else(|| {
                    Error::Unsupported("the Q-function baseline needs an environment that can be copied".into())
                })?;
                if j == kept.len() {
                    kept.push((seen, t, snap));
                } else {
                    kept[j] = (seen, t, snap);
                }
            }
            seen += 1;
            Ok(())
        };
        let batch = collect_rollout_observed(
            sess.env.as_mut(),
            &policy,
            None,
            &mut |_, _, _| Ok(vec![0.0]),
            RolloutSize::Steps(cfg.ppo.rollout_steps),
            &mut sess.rng,
            &mut observe,
        )?;
        sess.steps += batch.steps() as u64;
        let flat = crate::ppo::all_steps(&batch);

        let mut data = Vec::with_capacity(kept.len());
        for (idx, t, snap) in &kept {
            let (e, k) = flat[*idx];
            let r = &batch.rollouts[e];
            let (target, used) = q_target(
                snap.as_ref(),
                &r.traj.states[k],
                &r.traj.actions[k],
                spec.horizon - t,
                &policy,
                &cfg.metric,
                algo.q_rollouts,
                &mut sess.rng,
            )?;
            sess.steps += used;
            data.push(QSample {
                state: r.traj.states[k].clone(),
                action: r.traj.actions[k].clone(),
                target,
            });
        }
        let q_loss = fit_q(&mut q, &mut q_opt, &data, algo.q_fit_steps)?;

        let mut adv = Vec::with_capacity(batch.rollouts.len());
        for r in &batch.rollouts {
            let mut a = Vec::with_capacity(r.len());
            for (s, act) in r.traj.states.iter().zip(&r.traj.actions) {
                a.push(q.reward_vec(s, act)?[0] - expected_q(&q, &policy, s, 4, &mut sess.rng)?);
            }
            adv.push(a);
        }
        if cfg.ppo.normalize_advantages {
            normalize_advantages(&mut adv);
        }
        let st = policy_update(&mut policy, &mut opt, &batch, &adv, &cfg.ppo, &mut sess.rng)?;

        let score = sess.evaluate(&policy)?;
        let mut rec = IterationRecord::new(iter, sess.steps, score);
        rec.ppo_objective = st.objective;
        rec.mean_ratio = st.mean_ratio;
        rec.critic_loss = q_loss;
        sess.push(rec);
    }
    Ok(sess.log)
}
