use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::trajectory::{Action, DoneReason, Trajectory};
use crate::vecmath::compensated_sum;

use super::{ActionKind, Env, EnvSpec, Step, TrajectoryEval};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueueNetConfig {
    pub n_hosts: usize,
    /// Bottleneck capacity in units per step.
    pub capacity: f64,
    pub q_max: f64,
    pub horizon: usize,
    /// Mean arrivals per step for each host.
    pub demand_means: Vec<f64>,
    /// Randomly permute the demand means across hosts at every reset.
    pub shuffle_demand: bool,
    /// Queue-penalty weight ω of the engineered reward.
    pub omega: f64,
}

impl Default for QueueNetConfig {
    fn default() -> Self {
        Self {
            n_hosts: 4,
            capacity: 10.0,
            q_max: 50.0,
            horizon: 32,
            demand_means: vec![1.0, 2.0, 3.0, 4.0],
            shuffle_demand: true,
            omega: 1.0,
        }
    }
}

/// Hosts sharing one bottleneck link.
///
/// Every step each host receives Poisson arrivals into its queue (capped at
/// `q_max`, excess dropped), then the link serves host `i` up to
/// `share_i · capacity` units, where the shares are the softmax of the action.
/// Each unit still queued after service accrues one step of delay; delivered
/// units accrue one step of transmission delay.
///
/// Observation per host: queue fill, last arrivals, last share; plus the
/// elapsed fraction of the horizon. Aux per step:
/// `(bytes_delivered, sum_packet_delay, packets_delivered, queue_1..queue_n)`.
#[derive(Clone, Debug)]
pub struct QueueNet {
    cfg: QueueNetConfig,
    means: Vec<f64>,
    queues: Vec<f64>,
    last_arrivals: Vec<f64>,
    last_shares: Vec<f64>,
    demanded: f64,
    t: usize,
    rng: Rng,
}

pub(crate) const AUX_BYTES: usize = 0;
pub(crate) const AUX_DELAY: usize = 1;
pub(crate) const AUX_PACKETS: usize = 2;

/// Engineered networking reward:
/// `Σ_i bw_i/bw_max − ω (q_i/q_max)²` minus the standard deviation of the
/// bandwidth allocation.
pub fn engineered_reward(bw: &[f64], bw_max: f64, queues: &[f64], q_max: f64, allocation: &[f64], omega: f64) -> f64 {
    let util: f64 = bw.iter().map(|b| b / bw_max).sum();
    let penalty: f64 = queues.iter().map(|q| (q / q_max).powi(2)).sum();
    let n = allocation.len().max(1) as f64;
    let mean = allocation.iter().sum::<f64>() / n;
    let std = (allocation.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    util - omega * penalty - std
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

impl QueueNet {
    pub fn new(cfg: QueueNetConfig) -> Result<Self> {
        if cfg.n_hosts == 0 || cfg.capacity <= 0.0 || cfg.q_max <= 0.0 || cfg.horizon == 0 {
            return Err(Error::Config(
                "queuenet: hosts, capacity, q_max and horizon must be positive".into(),
            ));
        }
        if cfg.demand_means.len() != cfg.n_hosts || cfg.demand_means.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::Config(format!(
                "queuenet: need {} non-negative demand means, got {:?}",
                cfg.n_hosts, cfg.demand_means
            )));
        }
        let n = cfg.n_hosts;
        Ok(Self {
            means: cfg.demand_means.clone(),
            queues: vec![0.0; n],
            last_arrivals: vec![0.0; n],
            last_shares: vec![1.0 / n as f64; n],
            demanded: 0.0,
            t: 0,
            rng: Rng::new(0),
            cfg,
        })
    }

    pub fn config(&self) -> &QueueNetConfig {
        &self.cfg
    }

    pub fn queues(&self) -> &[f64] {
        &self.queues
    }

    /// Total units that arrived (including drops) since reset.
    pub fn demanded(&self) -> f64 {
        self.demanded
    }

    /// Override the per-host mean arrival rates for the current episode.
    pub fn set_demand_means(&mut self, means: Vec<f64>) {
        assert_eq!(means.len(), self.cfg.n_hosts);
        self.means = means;
    }

    fn observe(&self) -> Vec<f64> {
        let n = self.cfg.n_hosts;
        let arrival_scale = 2.0 * self.cfg.capacity / n as f64;
        let mut obs = Vec::with_capacity(3 * n + 1);
        obs.extend(self.queues.iter().map(|q| q / self.cfg.q_max));
        obs.extend(self.last_arrivals.iter().map(|a| a / arrival_scale));
        obs.extend(self.last_shares.iter().copied());
        obs.push(self.t as f64 / self.cfg.horizon as f64);
        obs
    }
}

impl TrajectoryEval for QueueNet {
    fn nu_dim(&self) -> usize {
        2
    }

    /// `(throughput, mean delay)`: delivered bytes per elapsed step and total
    /// delay per delivered packet.
    fn nu(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        if traj.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let bytes = compensated_sum(traj.aux.iter().map(|a| a[AUX_BYTES]));
        let delay = compensated_sum(traj.aux.iter().map(|a| a[AUX_DELAY]));
        let packets = compensated_sum(traj.aux.iter().map(|a| a[AUX_PACKETS]));
        Ok(vec![bytes / traj.len() as f64, delay / packets.max(1.0)])
    }
}

impl Env for QueueNet {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            state_dim: 3 * self.cfg.n_hosts + 1,
            action_kind: ActionKind::Continuous(self.cfg.n_hosts),
            horizon: self.cfg.horizon,
            nu_dim: 2,
        }
    }

    fn reset(&mut self, rng: &mut Rng) -> Vec<f64> {
        let n = self.cfg.n_hosts;
        self.rng = rng.fork();
        self.means = self.cfg.demand_means.clone();
        if self.cfg.shuffle_demand {
            self.rng.shuffle(&mut self.means);
        }
        self.queues = vec![0.0; n];
        self.last_arrivals = vec![0.0; n];
        self.last_shares = vec![1.0 / n as f64; n];
        self.demanded = 0.0;
        self.t = 0;
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Result<Step> {
        self.spec().action_kind.validate(action)?;
        let shares = softmax(action.as_continuous().expect("validated"));
        let n = self.cfg.n_hosts;
        let mut served = vec![0.0; n];
        for i in 0..n {
            let arrivals = self.rng.poisson(self.means[i]) as f64;
            self.demanded += arrivals;
            self.last_arrivals[i] = arrivals;
            self.queues[i] = (self.queues[i] + arrivals).min(self.cfg.q_max);
            served[i] = self.queues[i].min(shares[i] * self.cfg.capacity);
            self.queues[i] -= served[i];
        }
        let delivered: f64 = served.iter().sum();
        let waiting: f64 = self.queues.iter().sum();
        let reward = engineered_reward(
            &served,
            self.cfg.capacity,
            &self.queues,
            self.cfg.q_max,
            &shares,
            self.cfg.omega,
        );
        self.last_shares = shares;
        self.t += 1;
        let mut aux = Vec::with_capacity(3 + n);
        aux.extend([delivered, delivered + waiting, delivered]);
        aux.extend(self.queues.iter().copied());
        let done = self.t >= self.cfg.horizon;
        Ok(Step {
            state: self.observe(),
            aux,
            reward,
            done,
            done_reason: done.then_some(DoneReason::Horizon),
        })
    }

    fn snapshot(&self) -> Option<Box<dyn Env>> {
        Some(Box::new(self.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::run_episode;

    fn aux_traj(aux: Vec<Vec<f64>>) -> Trajectory {
        let n = aux.len();
        Trajectory {
            states: vec![vec![0.0]; n],
            actions: vec![Action::Continuous(vec![0.0; 4]); n],
            aux,
            env_rewards: vec![0.0; n],
            done_reason: DoneReason::Horizon,
        }
    }

    #[test]
    fn reset_clears_queues_deterministically() {
        let mut env = QueueNet::new(QueueNetConfig::default()).unwrap();
        let a = env.reset(&mut Rng::new(3));
        assert!(env.queues().iter().all(|&q| q == 0.0));
        let b = env.reset(&mut Rng::new(3));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_demand_delivers_nothing() {
        let cfg = QueueNetConfig {
            demand_means: vec![0.0; 4],
            ..Default::default()
        };
        let mut env = QueueNet::new(cfg).unwrap();
        env.reset(&mut Rng::new(0));
        let s = env.step(&Action::Continuous(vec![0.0; 4])).unwrap();
        assert_eq!(s.aux[AUX_BYTES], 0.0);
        assert_eq!(s.aux[AUX_DELAY], 0.0);
    }

    #[test]
    fn nu_from_aux() {
        // 32 steps delivering 10 bytes, 2 packets and 4 delay each.
        let traj = aux_traj(vec![vec![10.0, 4.0, 2.0, 0.0, 0.0, 0.0, 0.0]; 32]);
        let env = QueueNet::new(QueueNetConfig::default()).unwrap();
        assert_eq!(env.nu(&traj).unwrap(), vec![10.0, 2.0]);
        assert!(env.nu(&aux_traj(vec![])).is_err());
    }

    #[test]
    fn engineered_reward_plug_in() {
        let r = engineered_reward(&[10.0; 4], 10.0, &[0.0; 4], 50.0, &[0.25; 4], 1.0);
        assert!((r - 4.0).abs() < 1e-12);
        let r2 = engineered_reward(&[5.0, 0.0], 10.0, &[25.0, 0.0], 50.0, &[1.0, 0.0], 2.0);
        assert!((r2 - (0.5 - 2.0 * 0.25 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn conservation_and_bounds() {
        let mut env = QueueNet::new(QueueNetConfig::default()).unwrap();
        for seed in 0..20 {
            let traj = run_episode(&mut env, &mut Rng::new(seed), |_, _, rng| {
                Ok(Action::Continuous((0..4).map(|_| 2.0 * rng.normal()).collect()))
            })
            .unwrap();
            let delivered: f64 = traj.aux.iter().map(|a| a[AUX_BYTES]).sum();
            assert!(delivered <= env.demanded() + 1e-9);
            for a in &traj.aux {
                assert!(a[AUX_BYTES] <= env.cfg.capacity + 1e-9);
                assert!(a[3..].iter().all(|&q| (0.0..=env.cfg.q_max).contains(&q)));
            }
            let nu = env.nu(&traj).unwrap();
            assert!(nu.iter().all(|v| v.is_finite()));
            assert_eq!(traj.len(), 32);
        }
    }

    #[test]
    fn deterministic_replay() {
        let mut env = QueueNet::new(QueueNetConfig::default()).unwrap();
        let mut run = || run_episode(&mut env, &mut Rng::new(8), |s, _, _| Ok(Action::Continuous(s[..4].to_vec()))).unwrap();
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}
