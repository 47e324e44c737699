//! Small dense-vector helpers shared by the numeric modules.

use crate::error::{Error, Result};

/// Discount weights `(1, γ, γ², …, γ^{length-1})`.
pub fn discounted_weights(length: usize, gamma: f64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    if length == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let mut out = Vec::with_capacity(length);
    let mut w = 1.0;
    for _ in 0..length {
        out.push(w);
        w *= gamma;
    }
    Ok(out)
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}

/// Discount for returns over finite episodes, where `γ = 1` is allowed.
pub fn check_episodic_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::InvalidGamma(gamma))
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Componentwise mean of equally sized vectors, with compensated summation.
pub fn mean_of(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = vectors.first().ok_or(Error::EmptySet)?;
    let dim = first.len();
    let mut out = vec![0.0; dim];
    for (d, slot) in out.iter_mut().enumerate() {
        let mut total = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.len() != dim {
                return Err(Error::Dimension {
                    context: "mean_of",
                    expected: dim,
                    got: v.len(),
                });
            }
            total.push(v[d]);
        }
        *slot = compensated_sum(total) / vectors.len() as f64;
    }
    Ok(out)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Independent accumulators let the compiler pipeline and vectorize.
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator); zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    (ss / (values.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_examples() {
        assert_eq!(discounted_weights(3, 0.5).unwrap(), vec![1.0, 0.5, 0.25]);
        assert_eq!(discounted_weights(1, 0.3).unwrap(), vec![1.0]);
        // Oracle: direct multiplication.
        let oracle = [1.0, 0.99, 0.99 * 0.99, 0.99 * 0.99 * 0.99];
        let w = discounted_weights(4, 0.99).unwrap();
        for (a, b) in w.iter().zip(oracle) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((w[2] - 0.9801).abs() < 1e-12);
        assert!((w[3] - 0.970299).abs() < 1e-12);
    }

    #[test]
    fn weights_reject_bad_gamma() {
        assert!(matches!(discounted_weights(3, 1.0), Err(Error::InvalidGamma(_))));
        assert!(matches!(discounted_weights(3, -0.1), Err(Error::InvalidGamma(_))));
        assert!(discounted_weights(0, 0.5).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let vals = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(vals), 1.0);
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn std_of_two() {
        assert!((sample_std(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sample_std(&[4.0]), 0.0);
    }

    proptest::proptest! {
        #[test]
        fn weights_strictly_decrease(len in 2usize..40, gamma in 0.0f64..0.999) {
            let w = discounted_weights(len, gamma).unwrap();
            for pair in w.windows(2) {
                if gamma > 0.0 && pair[0] > 0.0 {
                    proptest::prop_assert!(pair[1] < pair[0]);
                }
            }
        }
    }
}
