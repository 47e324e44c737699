use crate::buffer::ReplayBuffer;
use crate::envs::TrajectoryEval;
use crate::error::Result;
use crate::metric::{eval_metric, MetricSpec};
use crate::rng::Rng;
use crate::trajectory::TrajectorySet;

/// Result of [`optimistic_sample`]: every scored candidate plus the indices
/// of the kept ones, best first.
#[derive(Debug)]
pub struct OptimisticSample<'a> {
    pub candidates: Vec<&'a TrajectorySet>,
    pub scores: Vec<f64>,
    pub kept: Vec<usize>,
}

impl<'a> OptimisticSample<'a> {
    pub fn kept_sets(&self) -> Vec<&'a TrajectorySet> {
        self.kept.iter().map(|&i| self.candidates[i]).collect()
    }
}

/// Indices of the `k` largest scores, best first; equal scores keep their
/// original order.
pub fn top_k_stable(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(k);
    order
}

/// Sample `n_b + k` sets from the buffer, score each with the true metric
/// and keep the best `n_b`.
pub fn optimistic_sample<'a>(
    buffer: &'a ReplayBuffer,
    n_b: usize,
    k: usize,
    spec: &MetricSpec,
    eval: &dyn TrajectoryEval,
    rng: &mut Rng,
) -> Result<OptimisticSample<'a>> {
    let candidates = buffer.sample_sets(n_b + k, rng)?;
    let scores = if k == 0 {
        vec![0.0; candidates.len()]
    } else {
        candidates
            .iter()
            .map(|s| eval_metric(spec, eval, s))
            .collect::<Result<Vec<_>>>()?
    };
    let kept = if k == 0 {
        (0..n_b).collect()
    } else {
        top_k_stable(&scores, n_b)
    };
    Ok(OptimisticSample {
        candidates,
        scores,
        kept,
    })
}
