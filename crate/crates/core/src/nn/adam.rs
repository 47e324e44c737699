use crate::error::{Error, Result};

use super::ParamVector;

/// Adam optimizer state for one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Apply one descent step using `params.grads`, then zero the gradients.
    /// Non-finite gradients abort the step and leave the parameters untouched.
    pub fn step(&mut self, params: &mut ParamVector) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Dimension {
                context: "adam_step",
                expected: self.m.len(),
                got: params.len(),
            });
        }
        if let Some((index, &value)) = params.grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index, value });
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let step_size = self.lr / bc1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((w, g), m), v) in params
            .values
            .iter_mut()
            .zip(params.grads.iter_mut())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * *g;
            *v = b2 * *v + (1.0 - b2) * *g * *g;
            *w -= step_size * *m / ((*v / bc2).sqrt() + eps);
            *g = 0.0;
        }
        Ok(())
    }
}
