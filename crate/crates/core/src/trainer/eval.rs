use crate::envs::run_episode;
use crate::envs::Env;
use crate::error::{Error, Result};
use crate::metric::{eval_metric, MetricSpec};
use crate::ppo::{clip_to_box, Policy};
use crate::rng::Rng;
use crate::trajectory::TrajectorySet;

/// `n` episodes from the policy, sampled or greedy.
pub fn policy_set(env: &mut dyn Env, policy: &Policy, n: usize, greedy: bool, rng: &mut Rng, tag: &str) -> Result<TrajectorySet> {
    let mut trajs = Vec::with_capacity(n);
    for _ in 0..n {
        trajs.push(run_episode(env, rng, |s, _, rng| {
            let a = if greedy { policy.greedy(s)? } else { policy.sample(s, rng)?.0 };
            Ok(clip_to_box(&a))
        })?);
    }
    Ok(TrajectorySet::new(trajs, tag))
}

/// `n` episodes from the uniformly random policy.
pub fn random_set(env: &mut dyn Env, n: usize, rng: &mut Rng) -> Result<TrajectorySet> {
    let kind = env.spec().action_kind;
    let mut trajs = Vec::with_capacity(n);
    for _ in 0..n {
        trajs.push(run_episode(env, rng, |_, _, rng| Ok(kind.random(rng)))?);
    }
    Ok(TrajectorySet::new(trajs, "uniform"))
}

/// Mean of the true metric over `eval_sets` fresh sets of `set_size`
/// episodes. Only the policy, the environment and the true metric are
/// involved.
pub fn evaluate_policy(
    policy: &Policy,
    env: &mut dyn Env,
    spec: &MetricSpec,
    eval_sets: usize,
    set_size: usize,
    greedy: bool,
    rng: &mut Rng,
) -> Result<f64> {
    if eval_sets == 0 || set_size == 0 {
        return Err(Error::Config("evaluation needs at least one set of one episode".into()));
    }
    let mut total = 0.0;
    for _ in 0..eval_sets {
        let set = policy_set(env, policy, set_size, greedy, rng, "eval")?;
        total += eval_metric(spec, env, &set)?;
    }
    Ok(total / eval_sets as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{ActionKind, DriveLoop, DriveLoopConfig};
    use crate::nn::Activation;

    #[test]
    fn greedy_policy_on_deterministic_env_has_no_variance() {
        let mut rng = Rng::new(0);
        let mut env = DriveLoop::new(DriveLoopConfig {
            hazards: 0,
            lateral_drift: 0.0,
            ..Default::default()
        })
        .unwrap();
        let policy = Policy::new(11, ActionKind::Discrete(5), &[8], Activation::Tanh, &mut rng).unwrap();
        let spec = MetricSpec::drive_default();
        let scores: Vec<f64> = (0..5)
            .map(|_| {
                eval_metric(
                    &spec,
                    &env.clone(),
                    &policy_set(&mut env, &policy, 3, true, &mut rng, "e").unwrap(),
                )
                .unwrap()
            })
            .collect();
        assert!(scores.windows(2).all(|w| w[0] == w[1]));
        let mean = evaluate_policy(&policy, &mut env, &spec, 5, 3, true, &mut rng).unwrap();
        assert_eq!(mean, scores[0]);
    }

    #[test]
    fn random_driving_scores_in_unit_interval() {
        let mut env = DriveLoop::new(DriveLoopConfig::default()).unwrap();
        let mut rng = Rng::new(1);
        let spec = MetricSpec::drive_default();
        for _ in 0..10 {
            let set = random_set(&mut env, 10, &mut rng).unwrap();
            let v = eval_metric(&spec, &env, &set).unwrap();
            assert!((0.0..=1.0).contains(&v), "{v}");
        }
    }
}
