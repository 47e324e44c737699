//! Pairwise distances between reward components.
//!
//! `SquaredL2` compares raw vectors. The other kinds first turn each input
//! into a probability distribution with a softmax and then compare the two
//! distributions.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityKind {
    #[default]
    SquaredL2,
    /// `(KL(p‖q) + KL(q‖p)) / 2`.
    Kl,
    Js,
    /// Closed form `Σ_t |CDF_p(t) − CDF_q(t)|` on the index line.
    Wasserstein1,
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Distance between `u` and `v` (equal lengths).
pub fn distance(kind: DiversityKind, u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    if kind == DiversityKind::SquaredL2 {
        return u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    }
    let p = softmax(u);
    let q = softmax(v);
    match kind {
        DiversityKind::SquaredL2 => unreachable!(),
        DiversityKind::Kl => 0.5 * p.iter().zip(&q).map(|(a, b)| (a - b) * (a.ln() - b.ln())).sum::<f64>(),
        DiversityKind::Js => {
            let mut s = 0.0;
            for (a, b) in p.iter().zip(&q) {
                let m = 0.5 * (a + b);
                s += 0.5 * (a * (a / m).ln() + b * (b / m).ln());
            }
            s.max(0.0)
        }
        DiversityKind::Wasserstein1 => {
            let (mut cp, mut cq, mut s) = (0.0, 0.0, 0.0);
            for (a, b) in p.iter().zip(&q) {
                cp += a;
                cq += b;
                s += (cp - cq).abs();
            }
            // The last CDF difference is zero up to rounding.
            s - (cp - cq).abs()
        }
    }
}

/// Gradients of [`distance`] with respect to `u` and `v`.
pub fn distance_grad(kind: DiversityKind, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    if kind == DiversityKind::SquaredL2 {
        let gu: Vec<f64> = u.iter().zip(v).map(|(a, b)| 2.0 * (a - b)).collect();
        let gv = gu.iter().map(|g| -g).collect();
        return (gu, gv);
    }
    let p = softmax(u);
    let q = softmax(v);
    let n = p.len();
    let (gp, gq): (Vec<f64>, Vec<f64>) = match kind {
        DiversityKind::SquaredL2 => unreachable!(),
        DiversityKind::Kl => (0..n)
            .map(|t| {
                let lr = p[t].ln() - q[t].ln();
                (0.5 * (lr + 1.0 - q[t] / p[t]), 0.5 * (-lr + 1.0 - p[t] / q[t]))
            })
            .unzip(),
        DiversityKind::Js => (0..n)
            .map(|t| {
                let m = 0.5 * (p[t] + q[t]);
                (0.5 * (p[t] / m).ln(), 0.5 * (q[t] / m).ln())
            })
            .unzip(),
        DiversityKind::Wasserstein1 => {
            // d/dp_s = Σ_{t ≥ s, t < n-1} sign(CDF_p(t) − CDF_q(t)).
            let mut signs = vec![0.0; n];
            let (mut cp, mut cq) = (0.0, 0.0);
            for t in 0..n.saturating_sub(1) {
                cp += p[t];
                cq += q[t];
                signs[t] = (cp - cq).signum() * if cp == cq { 0.0 } else { 1.0 };
            }
            let mut gp = vec![0.0; n];
            let mut acc = 0.0;
            for s in (0..n).rev() {
                acc += signs[s];
                gp[s] = acc;
            }
            let gq = gp.iter().map(|g| -g).collect();
            (gp, gq)
        }
    };
    (softmax_backward(&p, &gp), softmax_backward(&q, &gq))
}

fn softmax_backward(p: &[f64], g: &[f64]) -> Vec<f64> {
    let inner: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
    p.iter().zip(g).map(|(pi, gi)| pi * (gi - inner)).collect()
}
