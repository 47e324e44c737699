use super::config::Method;

/// One row per outer iteration; iteration 0 is the state after warm-up.
/// Quantities that a method does not produce are NaN. Records compare equal
/// when every field is bit-identical, so NaN fields match.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub outer_iteration: usize,
    /// Training environment steps used so far (evaluation excluded).
    pub env_steps: u64,
    pub eval_score: f64,
    pub reward_loss: f64,
    pub diversity_term: f64,
    pub ppo_objective: f64,
    pub critic_loss: f64,
    pub mean_ratio: f64,
    pub buffer_size: usize,
    /// Zero unless wall-clock recording is enabled.
    pub wall_ms: u64,
}

impl PartialEq for IterationRecord {
    fn eq(&self, o: &Self) -> bool {
        let floats = |r: &Self| {
            [
                r.eval_score,
                r.reward_loss,
                r.diversity_term,
                r.ppo_objective,
                r.critic_loss,
                r.mean_ratio,
            ]
            .map(f64::to_bits)
        };
        (self.outer_iteration, self.env_steps, self.buffer_size, self.wall_ms)
            == (o.outer_iteration, o.env_steps, o.buffer_size, o.wall_ms)
            && floats(self) == floats(o)
    }
}

impl PartialEq for InnerRecord {
    fn eq(&self, o: &Self) -> bool {
        let floats = |r: &Self| [r.objective, r.critic_loss, r.mean_ratio].map(f64::to_bits);
        self.outer_iteration == o.outer_iteration && floats(self) == floats(o)
    }
}

impl IterationRecord {
    pub fn new(outer_iteration: usize, env_steps: u64, eval_score: f64) -> Self {
        Self {
            outer_iteration,
            env_steps,
            eval_score,
            reward_loss: f64::NAN,
            diversity_term: f64::NAN,
            ppo_objective: f64::NAN,
            critic_loss: f64::NAN,
            mean_ratio: f64::NAN,
            buffer_size: 0,
            wall_ms: 0,
        }
    }
}

/// Statistics of one policy update inside an outer iteration.
#[derive(Clone, Debug)]
pub struct InnerRecord {
    pub outer_iteration: usize,
    pub objective: f64,
    pub critic_loss: f64,
    pub mean_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainLog {
    pub method: Method,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub inner: Vec<InnerRecord>,
}

impl TrainLog {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            method,
            seed,
            records: Vec::new(),
            inner: Vec::new(),
        }
    }

    pub fn final_score(&self) -> Option<f64> {
        self.records.last().map(|r| r.eval_score)
    }

    /// Mean evaluation score of the last `n` records.
    pub fn tail_mean(&self, n: usize) -> Option<f64> {
        let k = n.min(self.records.len());
        if k == 0 {
            return None;
        }
        let tail = &self.records[self.records.len() - k..];
        Some(tail.iter().map(|r| r.eval_score).sum::<f64>() / k as f64)
    }
}
