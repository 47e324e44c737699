use std::f64::consts::PI;

use crate::envs::ActionKind;
use crate::error::{check_dim, Error, Result};
use crate::nn::{Activation, AdamState, ForwardCache, Mlp, ParamVector};
use crate::rng::Rng;
use crate::trajectory::Action;

/// Stochastic policy: a Gaussian with state-independent learnable log-std
/// for continuous actions, a categorical over logits for discrete ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub net: Mlp,
    /// Per-dimension log standard deviation; empty for discrete actions.
    pub log_std: ParamVector,
    kind: ActionKind,
}

/// Forward pass of one state, kept for the matching backward pass.
#[derive(Clone, Debug)]
pub struct PolicyEval {
    cache: ForwardCache,
    /// Softmax probabilities (discrete actions only).
    probs: Vec<f64>,
    pub log_prob: f64,
    pub entropy: f64,
}

/// Optimizer state for both parameter blocks of a policy.
#[derive(Clone, Debug)]
pub struct PolicyOptimizer {
    pub net: AdamState,
    pub log_std: AdamState,
}

impl PolicyOptimizer {
    pub fn new(policy: &Policy, lr: f64) -> Self {
        Self {
            net: AdamState::new(policy.net.params.len(), lr),
            log_std: AdamState::new(policy.log_std.len(), lr),
        }
    }

    pub fn step(&mut self, policy: &mut Policy) -> Result<()> {
        self.net.step(&mut policy.net.params)?;
        self.log_std.step(&mut policy.log_std)
    }
}

impl Policy {
    /// The output layer is scaled down so the initial policy is close to
    /// uniform (discrete) or zero-mean (continuous).
    pub fn new(state_dim: usize, kind: ActionKind, hidden: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        let out = kind.encoding_dim();
        if out == 0 {
            return Err(Error::Config("action space must be non-empty".into()));
        }
        let mut sizes = vec![state_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(out);
        let mut net = Mlp::new(&sizes, activation, rng)?;
        net.scale_output_layer(0.01);
        let log_std = match kind {
            ActionKind::Continuous(d) => ParamVector::zeros(d),
            ActionKind::Discrete(_) => ParamVector::zeros(0),
        };
        Ok(Self { net, log_std, kind })
    }

    pub fn action_kind(&self) -> ActionKind {
        self.kind
    }

    pub fn zero_grad(&mut self) {
        self.net.params.zero_grad();
        self.log_std.zero_grad();
    }

    pub fn params_mut(&mut self) -> [&mut ParamVector; 2] {
        [&mut self.net.params, &mut self.log_std]
    }

    /// Sample an action and return it with its log-probability.
    pub fn sample(&self, state: &[f64], rng: &mut Rng) -> Result<(Action, f64)> {
        let out = self.net.forward(state)?;
        let action = match self.kind {
            ActionKind::Continuous(_) => Action::Continuous(
                out.iter()
                    .zip(&self.log_std.values)
                    .map(|(m, ls)| m + ls.exp() * rng.normal())
                    .collect(),
            ),
            ActionKind::Discrete(_) => {
                let probs = crate::reward::softmax(&out);
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut pick = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                Action::Discrete(pick)
            }
        };
        let lp = self.log_prob_from_output(&out, &action)?;
        Ok((action, lp))
    }

    /// Mode of the action distribution.
    pub fn greedy(&self, state: &[f64]) -> Result<Action> {
        let out = self.net.forward(state)?;
        Ok(match self.kind {
            ActionKind::Continuous(_) => Action::Continuous(out),
            ActionKind::Discrete(_) => {
                let mut best = 0;
                for (i, v) in out.iter().enumerate() {
                    if *v > out[best] {
                        best = i;
                    }
                }
                Action::Discrete(best)
            }
        })
    }

    pub fn log_prob(&self, state: &[f64], action: &Action) -> Result<f64> {
        self.log_prob_from_output(&self.net.forward(state)?, action)
    }

    fn log_prob_from_output(&self, out: &[f64], action: &Action) -> Result<f64> {
        match (self.kind, action) {
            (ActionKind::Continuous(d), Action::Continuous(a)) => {
                check_dim("continuous action", d, a.len())?;
                Ok(out
                    .iter()
                    .zip(a)
                    .zip(&self.log_std.values)
                    .map(|((m, x), ls)| {
                        let z = (x - m) / ls.exp();
                        -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
                    })
                    .sum())
            }
            (ActionKind::Discrete(n), Action::Discrete(i)) if *i < n => {
                let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + out.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                Ok(out[*i] - lse)
            }
            _ => Err(Error::InvalidAction("action does not match the policy head".into())),
        }
    }

    /// Forward pass with the log-probability of `action` and the entropy of
    /// the action distribution at `state`.
    pub fn evaluate(&self, state: &[f64], action: &Action) -> Result<PolicyEval> {
        let cache = self.net.forward_cached(state)?;
        let out = cache.output();
        let log_prob = self.log_prob_from_output(out, action)?;
        let (probs, entropy) = match self.kind {
            ActionKind::Continuous(_) => (
                Vec::new(),
                self.log_std
                    .values
                    .iter()
                    .map(|ls| ls + 0.5 * (2.0 * PI * std::f64::consts::E).ln())
                    .sum(),
            ),
            ActionKind::Discrete(_) => {
                let p = crate::reward::softmax(out);
                let h = -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>();
                (p, h)
            }
        };
        Ok(PolicyEval {
            cache,
            probs,
            log_prob,
            entropy,
        })
    }

    /// Accumulate `∂(c_logp · log π(a|s) + c_ent · H[π(·|s)])/∂θ`.
    pub fn backward(&mut self, eval: &PolicyEval, action: &Action, c_logp: f64, c_ent: f64) -> Result<()> {
        if c_logp == 0.0 && c_ent == 0.0 {
            return Ok(());
        }
        let out = eval.cache.output();
        let grad_out: Vec<f64> = match (self.kind, action) {
            (ActionKind::Continuous(_), Action::Continuous(a)) => {
                let mut g = Vec::with_capacity(out.len());
                for (k, ((m, x), ls)) in out.iter().zip(a).zip(&self.log_std.values).enumerate() {
                    let var = (2.0 * ls).exp();
                    g.push(c_logp * (x - m) / var);
                    let z2 = (x - m) * (x - m) / var;
                    self.log_std.grads[k] += c_logp * (z2 - 1.0) + c_ent;
                }
                g
            }
            (ActionKind::Discrete(_), Action::Discrete(i)) => {
                let p = &eval.probs;
                p.iter()
                    .enumerate()
                    .map(|(k, pk)| {
                        let onehot = if k == *i { 1.0 } else { 0.0 };
                        let dlogp = onehot - pk;
                        let dent = if *pk > 0.0 { -pk * (pk.ln() + eval.entropy) } else { 0.0 };
                        c_logp * dlogp + c_ent * dent
                    })
                    .collect()
            }
            _ => return Err(Error::InvalidAction("action does not match the policy head".into())),
        };
        self.net.backward(&eval.cache, &grad_out)
    }
}

/// Clip a continuous action to the unit box; discrete actions pass through.
pub fn clip_to_box(action: &Action) -> Action {
    match action {
        Action::Continuous(v) => Action::Continuous(v.iter().map(|x| x.clamp(-1.0, 1.0)).collect()),
        Action::Discrete(i) => Action::Discrete(*i),
    }
}
