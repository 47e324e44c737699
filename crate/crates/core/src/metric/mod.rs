//! Global performance metrics `ρ(E[ν(τ)])` and the learned surrogate `ρ̂`.

mod poly;

pub use poly::PolyAggregator;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::envs::TrajectoryEval;
use crate::error::{check_dim, Error, Result};
use crate::nn::ParamVector;
use crate::trajectory::{Trajectory, TrajectorySet};
use crate::vecmath::mean_of;

/// Floor applied before taking logarithms of throughput and delay.
pub const LOG_FLOOR: f64 = 1e-6;

/// Ground-truth aggregation function ρ together with the dimension of the ν
/// it consumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "aggregator", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    /// `ρ(x) = x` on scalar ν.
    Identity,
    /// `ρ(x) = log(x) / β` where ν is `exp(β · ν₀)` for the environment's
    /// scalar evaluation `ν₀`.
    RiskSensitive { beta: f64 },
    /// Generalized Gini: components sorted ascending, weighted by a strictly
    /// decreasing weight vector, so the worst-off component counts most.
    Concave { weights: Vec<f64> },
    /// `log(throughput) − δ · log(delay)`.
    QueueNet { delta: f64 },
    /// `α·A·(1 − B/B_max) + β·(1 − C/W_road) + γ·D/L_route` on
    /// `(completion, steps, lane-center distance, distance)`.
    DriveComposite {
        alpha: f64,
        beta: f64,
        gamma: f64,
        b_max: f64,
        w_road: f64,
        l_route: f64,
    },
}

/// Aggregator output plus whether a log-domain input had to be floored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub value: f64,
    pub clamped: bool,
}

impl MetricSpec {
    pub fn drive_default() -> Self {
        MetricSpec::DriveComposite {
            alpha: 0.4,
            beta: 0.1,
            gamma: 0.5,
            b_max: 100.0,
            w_road: 1.0,
            l_route: 100.0,
        }
    }

    pub fn nu_dim(&self) -> usize {
        match self {
            MetricSpec::Identity | MetricSpec::RiskSensitive { .. } => 1,
            MetricSpec::Concave { weights } => weights.len(),
            MetricSpec::QueueNet { .. } => 2,
            MetricSpec::DriveComposite { .. } => 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MetricSpec::Identity => Ok(()),
            MetricSpec::RiskSensitive { beta } => {
                if *beta == 0.0 || !beta.is_finite() {
                    Err(Error::Config("risk-sensitive beta must be finite and non-zero".into()))
                } else {
                    Ok(())
                }
            }
            MetricSpec::Concave { weights } => {
                if weights.is_empty() || weights.windows(2).any(|w| w[0] <= w[1]) {
                    Err(Error::Config(
                        "concave weights must be non-empty and strictly decreasing".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            MetricSpec::QueueNet { delta } => {
                if delta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config("queuenet delta must be finite".into()))
                }
            }
            MetricSpec::DriveComposite {
                alpha,
                beta,
                gamma,
                b_max,
                w_road,
                l_route,
            } => {
                if (alpha + beta + gamma - 1.0).abs() > 1e-9 {
                    Err(Error::Config("drive composite weights must sum to 1".into()))
                } else if *b_max <= 0.0 || *w_road <= 0.0 || *l_route <= 0.0 {
                    Err(Error::Config("drive composite scales must be positive".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// ν of one trajectory as seen by this metric. Risk-sensitive metrics
    /// exponentiate the environment's scalar evaluation.
    pub fn nu(&self, eval: &dyn TrajectoryEval, traj: &Trajectory) -> Result<Vec<f64>> {
        let mut v = eval.nu(traj)?;
        if let MetricSpec::RiskSensitive { beta } = self {
            let first = *v.first().ok_or(Error::EmptyTrajectory)?;
            v = vec![(beta * first).exp()];
        }
        check_dim("trajectory evaluation", self.nu_dim(), v.len())?;
        Ok(v)
    }

    pub fn aggregate(&self, x: &[f64]) -> Result<Aggregate> {
        check_dim("aggregator input", self.nu_dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("aggregator input"));
        }
        let mut clamped = false;
        let value = match self {
            MetricSpec::Identity => x[0],
            MetricSpec::RiskSensitive { beta } => {
                if x[0] <= 0.0 {
                    return Err(Error::Config("risk-sensitive input must be positive".into()));
                }
                x[0].ln() / beta
            }
            MetricSpec::Concave { weights } => {
                let mut sorted = x.to_vec();
                sorted.sort_by(f64::total_cmp);
                sorted.iter().zip(weights).map(|(a, w)| a * w).sum()
            }
            MetricSpec::QueueNet { delta } => {
                let thr = floor_log_input(x[0], &mut clamped);
                let delay = floor_log_input(x[1], &mut clamped);
                thr.ln() - delta * delay.ln()
            }
            MetricSpec::DriveComposite {
                alpha,
                beta,
                gamma,
                b_max,
                w_road,
                l_route,
            } => alpha * x[0] * (1.0 - x[1] / b_max) + beta * (1.0 - x[2] / w_road) + gamma * x[3] / l_route,
        };
        Ok(Aggregate { value, clamped })
    }

    pub fn rho(&self, x: &[f64]) -> Result<f64> {
        Ok(self.aggregate(x)?.value)
    }

    /// Analytic gradient of ρ. Floored log inputs have zero gradient.
    pub fn rho_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("aggregator input", self.nu_dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("aggregator input"));
        }
        Ok(match self {
            MetricSpec::Identity => vec![1.0],
            MetricSpec::RiskSensitive { beta } => {
                if x[0] <= 0.0 {
                    return Err(Error::Config("risk-sensitive input must be positive".into()));
                }
                vec![1.0 / (beta * x[0])]
            }
            MetricSpec::Concave { weights } => {
                let mut order: Vec<usize> = (0..x.len()).collect();
                order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
                let mut g = vec![0.0; x.len()];
                for (rank, &i) in order.iter().enumerate() {
                    g[i] = weights[rank];
                }
                g
            }
            MetricSpec::QueueNet { delta } => {
                let log_grad = |v: f64| if v > LOG_FLOOR { 1.0 / v } else { 0.0 };
                vec![log_grad(x[0]), -delta * log_grad(x[1])]
            }
            MetricSpec::DriveComposite {
                alpha,
                beta,
                gamma,
                b_max,
                w_road,
                l_route,
            } => vec![
                alpha * (1.0 - x[1] / b_max),
                -alpha * x[0] / b_max,
                -beta / w_road,
                gamma / l_route,
            ],
        })
    }
}

fn floor_log_input(v: f64, clamped: &mut bool) -> f64 {
    if v > LOG_FLOOR {
        v
    } else {
        *clamped = true;
        LOG_FLOOR
    }
}

/// Mean ν over a set of trajectories.
pub fn mean_nu(spec: &MetricSpec, eval: &dyn TrajectoryEval, set: &TrajectorySet) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let nus = set
        .trajectories
        .iter()
        .map(|t| spec.nu(eval, t))
        .collect::<Result<Vec<_>>>()?;
    mean_of(&nus)
}

/// `ρ` of the mean ν over `set`, with the clamping flag.
pub fn eval_metric_flagged(spec: &MetricSpec, eval: &dyn TrajectoryEval, set: &TrajectorySet) -> Result<Aggregate> {
    spec.aggregate(&mean_nu(spec, eval, set)?)
}

/// `ρ` of the mean ν over `set`. Floored log inputs are reported through the
/// logger.
pub fn eval_metric(spec: &MetricSpec, eval: &dyn TrajectoryEval, set: &TrajectorySet) -> Result<f64> {
    let agg = eval_metric_flagged(spec, eval, set)?;
    if agg.clamped {
        warn!("metric input floored at {LOG_FLOOR} before taking the logarithm");
    }
    Ok(agg.value)
}

/// The aggregator applied to learned returns: either a trainable polynomial
/// or a fixed catalog aggregator.
#[derive(Clone, Debug, PartialEq)]
pub enum RhoHat {
    Poly(PolyAggregator),
    Pinned(MetricSpec),
}

impl RhoHat {
    pub fn dim(&self) -> usize {
        match self {
            RhoHat::Poly(p) => p.dim(),
            RhoHat::Pinned(m) => m.nu_dim(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            RhoHat::Poly(p) => p.eval(x),
            RhoHat::Pinned(m) => m.rho(x),
        }
    }

    pub fn grad_x(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            RhoHat::Poly(p) => p.grad_x(x),
            RhoHat::Pinned(m) => m.rho_grad(x),
        }
    }

    /// Trainable coefficients, if any.
    pub fn params_mut(&mut self) -> Option<&mut ParamVector> {
        match self {
            RhoHat::Poly(p) => Some(&mut p.coeffs),
            RhoHat::Pinned(_) => None,
        }
    }

    /// Add `scale · ∂ρ̂(x)/∂ξ` to the coefficient gradients. No-op when pinned.
    pub fn accumulate_param_grad(&mut self, x: &[f64], scale: f64) -> Result<()> {
        if let RhoHat::Poly(p) = self {
            let m = p.monomials_at(x)?;
            for (g, v) in p.coeffs.grads.iter_mut().zip(m) {
                *g += scale * v;
            }
        }
        Ok(())
    }
}
