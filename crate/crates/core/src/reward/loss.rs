use std::sync::atomic::{AtomicBool, Ordering};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::envs::TrajectoryEval;
use crate::error::{check_dim, Error, Result};
use crate::metric::{mean_nu, MetricSpec, RhoHat};
use crate::nn::ForwardCache;
use crate::trajectory::TrajectorySet;
use crate::vecmath::check_episodic_gamma;

use super::diversity::{distance, distance_grad, DiversityKind};
use super::RewardNet;

/// What the learned returns are regressed onto.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// `(ρ(mean ν) − ρ̂(mean ν_ψ))²` per set.
    #[default]
    Aggregated,
    /// `Σ_i (mean ν_i − mean ν_ψ,i)²` per set, without any aggregator.
    PerComponent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardLossConfig {
    pub gamma: f64,
    pub diversity: DiversityKind,
    pub lambda_rd: f64,
    pub fit: FitMode,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardLossOutput {
    /// `fit − λ_RD · diversity`.
    pub loss: f64,
    pub fit: f64,
    /// Mean over trajectories of the summed pairwise component distances.
    pub diversity: f64,
}

static WARNED_SCALAR_DIVERSITY: AtomicBool = AtomicBool::new(false);

struct TrajPass {
    caches: Vec<ForwardCache>,
    /// `rewards[t][i]`.
    rewards: Vec<Vec<f64>>,
    returns: Vec<f64>,
}

/// Evaluate the reward loss on `batch` and accumulate its gradients into the
/// reward network and, when it is trainable, the aggregator. Gradients are
/// added to whatever the accumulators already hold.
pub fn reward_loss(
    net: &mut RewardNet,
    rho_hat: &mut RhoHat,
    batch: &[&TrajectorySet],
    spec: &MetricSpec,
    eval: &dyn TrajectoryEval,
    cfg: &RewardLossConfig,
) -> Result<RewardLossOutput> {
    check_episodic_gamma(cfg.gamma)?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if cfg.lambda_rd < 0.0 {
        return Err(Error::Config("diversity weight must be non-negative".into()));
    }
    let dim = net.dim();
    match cfg.fit {
        FitMode::Aggregated => check_dim("aggregator input", rho_hat.dim(), dim)?,
        FitMode::PerComponent => check_dim("per-component reward dimension", spec.nu_dim(), dim)?,
    }
    let use_diversity = cfg.lambda_rd > 0.0 && dim > 1;
    if cfg.lambda_rd > 0.0 && dim == 1 && !WARNED_SCALAR_DIVERSITY.swap(true, Ordering::Relaxed) {
        warn!("reward diversity has no effect with a one-dimensional reward");
    }
    let total_trajs: usize = batch.iter().map(|s| s.len()).sum();
    let n_b = batch.len() as f64;

    let mut fit = 0.0;
    let mut div_sum = 0.0;
    for set in batch {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut passes = Vec::with_capacity(set.len());
        for traj in &set.trajectories {
            let mut caches = Vec::with_capacity(traj.len());
            let mut rewards = Vec::with_capacity(traj.len());
            let mut returns = vec![0.0; dim];
            let mut w = 1.0;
            for (s, a) in traj.states.iter().zip(&traj.actions) {
                let cache = net.net.forward_cached(&net.encode(s, a)?)?;
                let r = cache.output().to_vec();
                for (acc, v) in returns.iter_mut().zip(&r) {
                    *acc += w * v;
                }
                w *= cfg.gamma;
                caches.push(cache);
                rewards.push(r);
            }
            if caches.is_empty() {
                return Err(Error::EmptyTrajectory);
            }
            passes.push(TrajPass {
                caches,
                rewards,
                returns,
            });
        }
        let n_tau = passes.len() as f64;
        let mut x = vec![0.0; dim];
        for p in &passes {
            for (acc, v) in x.iter_mut().zip(&p.returns) {
                *acc += v / n_tau;
            }
        }

        // Gradient of the fit term with respect to the mean learned return.
        let gx: Vec<f64> = match cfg.fit {
            FitMode::Aggregated => {
                let target = spec.rho(&mean_nu(spec, eval, set)?)?;
                let err = target - rho_hat.eval(&x)?;
                fit += err * err / n_b;
                let g_out = -2.0 * err / n_b;
                rho_hat.accumulate_param_grad(&x, g_out)?;
                rho_hat.grad_x(&x)?.iter().map(|g| g * g_out).collect()
            }
            FitMode::PerComponent => {
                let target = mean_nu(spec, eval, set)?;
                target
                    .iter()
                    .zip(&x)
                    .map(|(y, xi)| {
                        let err = y - xi;
                        fit += err * err / n_b;
                        -2.0 * err / n_b
                    })
                    .collect()
            }
        };

        for p in &passes {
            let len = p.caches.len();
            // out_grads[t][i] accumulates dLoss/dr_{t,i}.
            let mut out_grads: Vec<Vec<f64>> = Vec::with_capacity(len);
            let mut w = 1.0;
            for _ in 0..len {
                out_grads.push(gx.iter().map(|g| g * w / n_tau).collect());
                w *= cfg.gamma;
            }
            if use_diversity {
                let scale = -cfg.lambda_rd / total_trajs as f64;
                div_sum += diversity_with_grads(cfg.diversity, p, cfg.gamma, scale, &mut out_grads);
            }
            for (cache, og) in p.caches.iter().zip(&out_grads) {
                net.net.backward(cache, og)?;
            }
        }
    }
    let diversity = if use_diversity { div_sum / total_trajs as f64 } else { 0.0 };
    Ok(RewardLossOutput {
        loss: fit - cfg.lambda_rd * diversity,
        fit,
        diversity,
    })
}

/// Σ_{i<j} d between the components of one trajectory; adds
/// `scale · ∂/∂r_{t,i}` into `out_grads`.
fn diversity_with_grads(kind: DiversityKind, p: &TrajPass, gamma: f64, scale: f64, out_grads: &mut [Vec<f64>]) -> f64 {
    let dim = p.returns.len();
    let len = p.rewards.len();
    let weights: Vec<f64> = std::iter::successors(Some(1.0), |w| Some(w * gamma)).take(len).collect();
    let profiles: Vec<Vec<f64>> = if kind == DiversityKind::SquaredL2 {
        p.returns.iter().map(|r| vec![*r]).collect()
    } else {
        (0..dim)
            .map(|i| p.rewards.iter().zip(&weights).map(|(r, w)| w * r[i]).collect())
            .collect()
    };
    let mut total = 0.0;
    for i in 0..dim {
        for j in i + 1..dim {
            total += distance(kind, &profiles[i], &profiles[j]);
            let (gi, gj) = distance_grad(kind, &profiles[i], &profiles[j]);
            for t in 0..len {
                // A return is Σ_t w_t r_t; a profile entry is w_t r_t.
                let (di, dj) = if kind == DiversityKind::SquaredL2 {
                    (gi[0], gj[0])
                } else {
                    (gi[t], gj[t])
                };
                out_grads[t][i] += scale * di * weights[t];
                out_grads[t][j] += scale * dj * weights[t];
            }
        }
    }
    total
}
