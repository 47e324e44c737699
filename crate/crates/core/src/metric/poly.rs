use crate::error::{check_dim, Error, Result};
use crate::nn::ParamVector;

/// Learned aggregator: a multivariate polynomial over `dim` variables with
/// one coefficient per monomial of total degree at most `degree`.
///
/// Monomials are ordered by total degree, then lexicographically by exponent
/// vector with the first variable's exponent largest first. For one variable
/// and degree 2 the coefficients are `(constant, x, x²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyAggregator {
    dim: usize,
    degree: u32,
    exponents: Vec<Vec<u32>>,
    pub coeffs: ParamVector,
}

impl PolyAggregator {
    /// Polynomial initialized to the mean of its inputs: linear coefficients
    /// `1/dim`, every other coefficient zero.
    pub fn new(dim: usize, degree: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("polynomial aggregator needs at least one input".into()));
        }
        let exponents = monomials(dim, degree);
        let values = exponents
            .iter()
            .map(|e| if e.iter().sum::<u32>() == 1 { 1.0 / dim as f64 } else { 0.0 })
            .collect();
        Ok(Self {
            dim,
            degree,
            exponents,
            coeffs: ParamVector::from_values(values),
        })
    }

    pub fn with_coeffs(dim: usize, degree: u32, coeffs: Vec<f64>) -> Result<Self> {
        let mut p = Self::new(dim, degree)?;
        check_dim("polynomial coefficients", p.coeffs.len(), coeffs.len())?;
        p.coeffs = ParamVector::from_values(coeffs);
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// Values of every monomial at `x`; this is also the gradient of the
    /// polynomial with respect to its coefficients.
    pub fn monomials_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("polynomial input", self.dim, x.len())?;
        Ok(self.exponents.iter().map(|e| monomial(e, x)).collect())
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let m = self.monomials_at(x)?;
        Ok(m.iter().zip(&self.coeffs.values).map(|(a, b)| a * b).sum())
    }

    pub fn grad_x(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("polynomial input", self.dim, x.len())?;
        let mut g = vec![0.0; self.dim];
        for (e, &c) in self.exponents.iter().zip(&self.coeffs.values) {
            if c == 0.0 {
                continue;
            }
            for i in 0..self.dim {
                if e[i] == 0 {
                    continue;
                }
                let mut term = c * e[i] as f64 * x[i].powi(e[i] as i32 - 1);
                for (j, (&ej, &xj)) in e.iter().zip(x).enumerate() {
                    if j != i && ej > 0 {
                        term *= xj.powi(ej as i32);
                    }
                }
                g[i] += term;
            }
        }
        Ok(g)
    }

    /// Gradients with respect to the input and to the coefficients.
    pub fn grads(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.grad_x(x)?, self.monomials_at(x)?))
    }
}

fn monomial(e: &[u32], x: &[f64]) -> f64 {
    e.iter()
        .zip(x)
        .map(|(&k, &v)| if k == 0 { 1.0 } else { v.powi(k as i32) })
        .product()
}

/// Exponent vectors of all monomials of total degree `<= degree`.
fn monomials(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn fill(prefix: &mut Vec<u32>, dim: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == dim {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            prefix.push(k);
            fill(prefix, dim, remaining - k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=degree {
        fill(&mut Vec::with_capacity(dim), dim, total, &mut out);
    }
    out
}
