use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::Rng;
use crate::vecmath::{axpy, dot};

use super::ParamVector;

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Fully connected network. Parameters are stored layer by layer as a
/// row-major `out × in` weight block followed by `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    pub params: ParamVector,
    offsets: Vec<usize>,
}

/// Layer activations of one forward pass, reused by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds at least the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

impl Mlp {
    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!(
                "layer sizes must list at least input and output, all positive; got {sizes:?}"
            )));
        }
        Ok(())
    }

    /// Network with all parameters zero.
    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        Self::from_values(sizes, activation, vec![0.0; Self::param_count(sizes)])
    }

    pub fn from_values(sizes: &[usize], activation: Activation, values: Vec<f64>) -> Result<Self> {
        Self::check_sizes(sizes)?;
        check_dim("mlp parameters", Self::param_count(sizes), values.len())?;
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut off = 0;
        for w in sizes.windows(2) {
            offsets.push(off);
            off += (w[0] + 1) * w[1];
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            activation,
            params: ParamVector::from_values(values),
            offsets,
        })
    }

    /// Weights and biases drawn uniformly from `±1/√fan_in`.
    pub fn new(sizes: &[usize], activation: Activation, rng: &mut Rng) -> Result<Self> {
        let mut net = Self::zeros(sizes, activation)?;
        for layer in 0..net.num_layers() {
            let bound = 1.0 / (net.sizes[layer] as f64).sqrt();
            for v in net.layer_params_mut(layer) {
                *v = rng.uniform_range(-bound, bound);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn layer_range(&self, layer: usize) -> std::ops::Range<usize> {
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        self.offsets[layer]..self.offsets[layer] + (fan_in + 1) * fan_out
    }

    /// Weights followed by biases of one layer.
    pub fn layer_params_mut(&mut self, layer: usize) -> &mut [f64] {
        let r = self.layer_range(layer);
        &mut self.params.values[r]
    }

    /// Multiply the final layer's weights and biases by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let last = self.num_layers() - 1;
        self.layer_params_mut(last).iter_mut().for_each(|v| *v *= factor);
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.sizes == other.sizes && self.activation == other.activation
    }

    fn layer_forward(&self, layer: usize, x: &[f64]) -> Vec<f64> {
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let p = &self.params.values[self.layer_range(layer)];
        let (w, b) = p.split_at(fan_in * fan_out);
        let hidden = layer + 1 < self.num_layers();
        (0..fan_out)
            .map(|j| {
                let z = b[j] + dot(&w[j * fan_in..(j + 1) * fan_in], x);
                if hidden {
                    self.activation.apply(z)
                } else {
                    z
                }
            })
            .collect()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_dim("mlp input", self.input_dim(), input.len())?;
        let mut x = self.layer_forward(0, input);
        for layer in 1..self.num_layers() {
            x = self.layer_forward(layer, &x);
        }
        Ok(x)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        check_dim("mlp input", self.input_dim(), input.len())?;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(input.to_vec());
        for layer in 0..self.num_layers() {
            let next = self.layer_forward(layer, &activations[layer]);
            activations.push(next);
        }
        Ok(ForwardCache { activations })
    }

    /// Accumulate `∂(output · output_grad)/∂params` into `params.grads`.
    pub fn backward(&mut self, cache: &ForwardCache, output_grad: &[f64]) -> Result<()> {
        self.backward_impl(cache, output_grad, false).map(|_| ())
    }

    /// As [`Mlp::backward`], also returning the gradient with respect to the input.
    pub fn backward_with_input_grad(&mut self, cache: &ForwardCache, output_grad: &[f64]) -> Result<Vec<f64>> {
        self.backward_impl(cache, output_grad, true)
            .map(|g| g.expect("input gradient requested"))
    }

    /// Backward pass that recomputes the forward activations for `input`.
    pub fn backward_from_input(&mut self, input: &[f64], output_grad: &[f64]) -> Result<()> {
        let cache = self.forward_cached(input)?;
        self.backward(&cache, output_grad)
    }

    fn backward_impl(&mut self, cache: &ForwardCache, output_grad: &[f64], want_input_grad: bool) -> Result<Option<Vec<f64>>> {
        check_dim("mlp output gradient", self.output_dim(), output_grad.len())?;
        check_dim("mlp cache", self.sizes.len(), cache.activations.len())?;
        let n_layers = self.num_layers();
        let mut delta = output_grad.to_vec();
        for layer in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
            if layer + 1 < n_layers {
                let y = &cache.activations[layer + 1];
                for (d, &yj) in delta.iter_mut().zip(y) {
                    *d *= self.activation.derivative_from_output(yj);
                }
            }
            let range = self.layer_range(layer);
            let x = &cache.activations[layer];
            {
                let g = &mut self.params.grads[range.clone()];
                let (gw, gb) = g.split_at_mut(fan_in * fan_out);
                for (j, &dj) in delta.iter().enumerate() {
                    if dj != 0.0 {
                        axpy(dj, x, &mut gw[j * fan_in..(j + 1) * fan_in]);
                        gb[j] += dj;
                    }
                }
            }
            if layer > 0 || want_input_grad {
                let w = &self.params.values[range.start..range.start + fan_in * fan_out];
                let mut prev = vec![0.0; fan_in];
                for (j, &dj) in delta.iter().enumerate() {
                    if dj != 0.0 {
                        axpy(dj, &w[j * fan_in..(j + 1) * fan_in], &mut prev);
                    }
                }
                delta = prev;
            }
        }
        Ok(want_input_grad.then_some(delta))
    }
}
