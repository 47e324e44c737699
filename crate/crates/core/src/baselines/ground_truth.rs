use crate::error::Result;
use crate::ppo::{collect_rollout, scalar_ppo_update, RolloutSize};
use crate::trainer::{IterationRecord, RunConfig, Session, TrainLog};

/// Standard PPO on the environment's built-in reward: the dense or sparse
/// reward of PointGoal, the engineered reward of QueueNet, and progress
/// along the route for DriveLoop. Scored with the true metric.
pub fn run_ground_truth_ppo(cfg: &RunConfig) -> Result<TrainLog> {
    let mut sess = Session::new(cfg)?;
    let mut ac = sess.new_actor_critic(1)?;
    let score = sess.evaluate(&ac.policy)?;
    sess.push(IterationRecord::new(0, 0, score));
    for iter in 1..=cfg.algo.outer_iterations {
        if !sess.budget_left() {
            break;
        }
        let batch = collect_rollout(
            sess.env.as_mut(),
            &ac.policy,
            Some(&ac.critic),
            &mut |_, _, step| Ok(vec![step.reward]),
            RolloutSize::Steps(cfg.ppo.rollout_steps),
            &mut sess.rng,
        )?;
        sess.steps += batch.steps() as u64;
        let st = scalar_ppo_update(&mut ac, &batch, &cfg.ppo, &mut sess.rng)?;
        let score = sess.evaluate(&ac.policy)?;
        let mut rec = IterationRecord::new(iter, sess.steps, score);
        rec.ppo_objective = st.objective;
        rec.critic_loss = st.critic_loss;
        rec.mean_ratio = st.mean_ratio;
        sess.push(rec);
    }
    Ok(sess.log)
}
