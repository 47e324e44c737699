use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::metric::RhoHat;

use super::rollout::RolloutBatch;

/// How learned vector returns are turned into scalar advantages.
///
/// With `G_t^τ` the vector return-to-go, `V_t^τ` the critic value, and
/// `M_t` the mean of `G_t` over the episodes still running at step `t`
/// (`n_t` of them):
///
/// - `BatchMean`: `ρ̂(M_t) − ρ̂(V_t^τ)`. The first term is shared by every
///   episode at step `t`, so the advantage does not depend on the action taken.
/// - `PerTrajectory`: `ρ̂(G_t^τ) − ρ̂(V_t^τ)`.
/// - `Marginal`: `ρ̂(M_t) − ρ̂(M_t − (G_t^τ − V_t^τ)/n_t)`, the change in the
///   aggregated batch return when this episode's return is replaced by its
///   critic estimate.
///
/// All three agree when the batch holds a single episode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageMode {
    BatchMean,
    PerTrajectory,
    #[default]
    Marginal,
}

/// Raw (unnormalized) advantages, indexed `[episode][step]`.
pub fn advantages(batch: &RolloutBatch, rho_hat: &RhoHat, gamma: f64, mode: AdvantageMode) -> Result<Vec<Vec<f64>>> {
    crate::vecmath::check_episodic_gamma(gamma)?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dim = rho_hat.dim();
    let returns: Vec<Vec<Vec<f64>>> = batch.rollouts.iter().map(|r| r.returns_to_go(gamma)).collect();
    for (r, g) in batch.rollouts.iter().zip(&returns) {
        check_dim("critic values", r.len(), r.values.len())?;
        if let Some(first) = g.first() {
            check_dim("reward dimension", dim, first.len())?;
        }
        if let Some(v) = r.values.first() {
            check_dim("critic dimension", dim, v.len())?;
        }
    }
    let max_len = batch.rollouts.iter().map(|r| r.len()).max().unwrap_or(0);
    // Mean return-to-go over the episodes alive at each step.
    let mut means = vec![vec![0.0; dim]; max_len];
    let mut alive = vec![0usize; max_len];
    for g in &returns {
        for (t, gt) in g.iter().enumerate() {
            alive[t] += 1;
            for (m, v) in means[t].iter_mut().zip(gt) {
                *m += v;
            }
        }
    }
    for (m, n) in means.iter_mut().zip(&alive) {
        if *n > 0 {
            m.iter_mut().for_each(|v| *v /= *n as f64);
        }
    }
    let rho_means: Vec<f64> = if mode == AdvantageMode::PerTrajectory {
        Vec::new()
    } else {
        means.iter().map(|m| rho_hat.eval(m)).collect::<Result<_>>()?
    };

    let mut out = Vec::with_capacity(batch.rollouts.len());
    for (r, g) in batch.rollouts.iter().zip(&returns) {
        let mut adv = Vec::with_capacity(r.len());
        for t in 0..r.len() {
            let v = &r.values[t];
            let a = match mode {
                AdvantageMode::BatchMean => rho_means[t] - rho_hat.eval(v)?,
                AdvantageMode::PerTrajectory => rho_hat.eval(&g[t])? - rho_hat.eval(v)?,
                AdvantageMode::Marginal => {
                    let n = alive[t] as f64;
                    let replaced: Vec<f64> = means[t]
                        .iter()
                        .zip(&g[t])
                        .zip(v)
                        .map(|((m, gi), vi)| m - (gi - vi) / n)
                        .collect();
                    rho_means[t] - rho_hat.eval(&replaced)?
                }
            };
            if !a.is_finite() {
                return Err(Error::NonFinite("advantage"));
            }
            adv.push(a);
        }
        out.push(adv);
    }
    Ok(out)
}

/// Shift and scale to zero mean and unit standard deviation across the
/// whole batch. A constant batch is only centered.
pub fn normalize_advantages(adv: &mut [Vec<f64>]) {
    let n: usize = adv.iter().map(|a| a.len()).sum();
    if n == 0 {
        return;
    }
    let mean = adv.iter().flatten().sum::<f64>() / n as f64;
    let var = adv.iter().flatten().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    let scale = if std > 1e-8 { 1.0 / std } else { 1.0 };
    for a in adv.iter_mut().flatten() {
        *a = (*a - mean) * scale;
    }
}
