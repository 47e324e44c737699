use crate::error::{Error, Result};
use crate::metric::eval_metric;
use crate::ppo::{collect_rollout, Policy, PolicyOptimizer, RolloutBatch, RolloutSize};
use crate::trainer::{IterationRecord, RunConfig, Session, TrainLog};

/// Baseline for a batch of set scores: the batch mean when there are at
/// least two sets, otherwise the running mean of earlier scores.
pub fn reinforce_baseline(scores: &[f64], running: Option<f64>) -> Result<f64> {
    match scores.len() {
        0 => Err(Error::EmptyBatch),
        1 => Ok(running.unwrap_or(scores[0])),
        // Exact for a constant batch, where a rounded mean would leave a residue.
        _ if scores.iter().all(|s| *s == scores[0]) => Ok(scores[0]),
        n => Ok(scores.iter().sum::<f64>() / n as f64),
    }
}

/// Accumulate the ascent direction `Σ_k (g_k − b) Σ_τ Σ_t ∇log π(a_t|s_t)`,
/// divided by the number of episodes, into the policy gradients.
pub fn reinforce_gradient(policy: &mut Policy, sets: &[RolloutBatch], scores: &[f64], baseline: f64) -> Result<()> {
    if sets.len() != scores.len() {
        return Err(Error::Dimension {
            context: "set scores",
            expected: sets.len(),
            got: scores.len(),
        });
    }
    let episodes: usize = sets.iter().map(|s| s.rollouts.len()).sum();
    if episodes == 0 {
        return Err(Error::EmptyBatch);
    }
    for (set, g) in sets.iter().zip(scores) {
        let c = (g - baseline) / episodes as f64;
        if c == 0.0 {
            continue;
        }
        for r in &set.rollouts {
            for (s, a) in r.traj.states.iter().zip(&r.policy_actions) {
                let ev = policy.evaluate(s, a)?;
                policy.backward(&ev, a, c, 0.0)?;
            }
        }
    }
    Ok(())
}

/// Score-function ascent on the true metric of whole trajectory sets.
pub fn run_reinforce_direct(cfg: &RunConfig) -> Result<TrainLog> {
    let sess = Session::new(cfg)?;
    Ok(reinforce_loop(sess)?.0)
}

pub(crate) fn reinforce_loop(mut sess: Session) -> Result<(TrainLog, Policy)> {
    let cfg = sess.cfg.clone();
    let mut policy = sess.new_actor_critic(1)?.policy;
    let mut opt = PolicyOptimizer::new(&policy, cfg.ppo.lr_actor);
    let (mut running_sum, mut running_n) = (0.0, 0usize);
    let score = sess.evaluate(&policy)?;
    sess.push(IterationRecord::new(0, 0, score));
    for iter in 1..=cfg.algo.outer_iterations {
        if !sess.budget_left() {
            break;
        }
        let mut sets = Vec::with_capacity(cfg.algo.reinforce_sets);
        let mut scores = Vec::with_capacity(cfg.algo.reinforce_sets);
        for _ in 0..cfg.algo.reinforce_sets {
            let batch = collect_rollout(
                sess.env.as_mut(),
                &policy,
                None,
                &mut |_, _, _| Ok(Vec::new()),
                RolloutSize::Episodes(cfg.algo.set_size),
                &mut sess.rng,
            )?;
            sess.steps += batch.steps() as u64;
            scores.push(eval_metric(&cfg.metric, sess.env.as_ref(), &batch.to_set("reinforce"))?);
            sets.push(batch);
        }
        let running = (running_n > 0).then(|| running_sum / running_n as f64);
        let b = reinforce_baseline(&scores, running)?;
        running_sum += scores.iter().sum::<f64>();
        running_n += scores.len();

        policy.zero_grad();
        reinforce_gradient(&mut policy, &sets, &scores, b)?;
        for p in policy.params_mut() {
            p.scale_grads(-1.0);
        }
        crate::nn::clip_grad_norm(&mut policy.params_mut(), cfg.ppo.max_grad_norm);
        opt.step(&mut policy)?;

        let score = sess.evaluate(&policy)?;
        let mut rec = IterationRecord::new(iter, sess.steps, score);
        rec.ppo_objective = scores.iter().sum::<f64>() / scores.len() as f64;
        sess.push(rec);
    }
    Ok((sess.log, policy))
}
