use crate::error::{check_dim, Result};

/// Flat trainable parameters with a paired gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            grads: vec![0.0; len],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        let grads = vec![0.0; values.len()];
        Self { values, grads }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Copy values (not gradients) from `src`.
    pub fn copy_from(&mut self, src: &ParamVector) -> Result<()> {
        check_dim("params_copy", self.len(), src.len())?;
        self.values.copy_from_slice(&src.values);
        Ok(())
    }

    pub fn grad_sq_norm(&self) -> f64 {
        self.grads.iter().map(|g| g * g).sum()
    }

    pub fn scale_grads(&mut self, factor: f64) {
        self.grads.iter_mut().for_each(|g| *g *= factor);
    }
}

/// Scale the gradients of several parameter vectors jointly so that their
/// combined L2 norm is at most `max_norm`. Returns the pre-clipping norm.
pub fn clip_grad_norm(params: &mut [&mut ParamVector], max_norm: f64) -> f64 {
    let norm = params.iter().map(|p| p.grad_sq_norm()).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let f = max_norm / norm;
        for p in params.iter_mut() {
            p.scale_grads(f);
        }
    }
    norm
}
