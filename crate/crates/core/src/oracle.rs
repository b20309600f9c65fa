//! Exact enumeration over small binary-vector distributions and the
//! per-dimension mean-field objectives. Ground truth for the approximate
//! operators and updates.
//!
//! Binary vectors are bitmasks: bit `k` set means feature `k` is known.

use crate::error::{Error, Result};
use crate::vector::ProbVector;

pub const MAX_DIM: usize = 20;

const MASS_TOLERANCE: f64 = 1e-12;

/// Dense table of probabilities indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    dim: usize,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn from_dense(dim: usize, probs: Vec<f64>) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::DimensionTooLarge { dim, max: MAX_DIM });
        }
        if probs.len() != 1 << dim {
            return Err(Error::InvalidDistribution(format!(
                "expected {} states for dim {dim}, got {}",
                1usize << dim,
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("negative or NaN mass {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("total mass {total}")));
        }
        Ok(DiscreteDistribution { dim, probs })
    }

    /// Sparse construction from `(bitmask, probability)` entries.
    pub fn from_support(dim: usize, support: &[(usize, f64)]) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::DimensionTooLarge { dim, max: MAX_DIM });
        }
        let mut probs = vec![0.0; 1 << dim];
        for &(mask, p) in support {
            if mask >= probs.len() {
                return Err(Error::InvalidDistribution(format!("state {mask} outside dim {dim}")));
            }
            probs[mask] += p;
        }
        Self::from_dense(dim, probs)
    }

    pub fn point(dim: usize, mask: usize) -> Result<Self> {
        Self::from_support(dim, &[(mask, 1.0)])
    }

    pub fn uniform_over(dim: usize, masks: &[usize]) -> Result<Self> {
        let p = 1.0 / masks.len() as f64;
        let support: Vec<_> = masks.iter().map(|&m| (m, p)).collect();
        Self::from_support(dim, &support)
    }

    /// Product distribution with the given marginals.
    pub fn from_factorized(marginals: &ProbVector) -> Result<Self> {
        let dim = marginals.dim();
        if dim > MAX_DIM {
            return Err(Error::DimensionTooLarge { dim, max: MAX_DIM });
        }
        let mut probs = vec![1.0];
        for &q in marginals.iter() {
            // bit k of the new states is the high bit of this expansion
            let lower: Vec<f64> = probs.iter().map(|p| p * (1.0 - q)).collect();
            let upper: Vec<f64> = probs.iter().map(|p| p * q).collect();
            probs = lower;
            probs.extend(upper);
        }
        Self::from_dense(dim, probs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prob(&self, mask: usize) -> f64 {
        self.probs.get(mask).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// `P(y ⇒ x) = E_{P(x)} E_{P(y)} Π_k (1 − (1 − y_k)·x_k)`: the mass of
/// pairs where every feature known in `x` is also known in `y`.
///
/// Evaluated as `Σ_x P(x)·Σ_{y ⊇ x} P(y)` with a superset-sum transform.
pub fn exact_entail_prob(px: &DiscreteDistribution, py: &DiscreteDistribution) -> Result<f64> {
    if px.dim != py.dim {
        return Err(Error::DimensionMismatch { left: px.dim, right: py.dim });
    }
    let mut superset = py.probs.clone();
    for k in 0..py.dim {
        let bit = 1 << k;
        for mask in 0..superset.len() {
            if mask & bit == 0 {
                superset[mask] += superset[mask | bit];
            }
        }
    }
    let p: f64 = px.probs.iter().zip(&superset).map(|(a, b)| a * b).sum();
    Ok(p.clamp(0.0, 1.0))
}

/// Per-dimension marginals `Q(x_k = 1)`.
pub fn factorize(dist: &DiscreteDistribution) -> ProbVector {
    let mut marginals = vec![0.0; dist.dim];
    for (mask, &p) in dist.probs.iter().enumerate() {
        for (k, m) in marginals.iter_mut().enumerate() {
            if mask >> k & 1 == 1 {
                *m += p;
            }
        }
    }
    let marginals = marginals.into_iter().map(|m| m.clamp(0.0, 1.0)).collect();
    ProbVector::new(marginals).expect("marginals of a valid distribution")
}

fn neg_entropy(q: f64) -> f64 {
    let xlogx = |p: f64| if p > 0.0 { p * p.ln() } else { 0.0 };
    xlogx(q) + xlogx(1.0 - q)
}

/// x-dependent part of the forward-inference bound for one dimension:
/// `q_x ln q_x + (1 − q_x) ln(1 − q_x) − q_x θ_x − q_x ln q_y`.
pub fn bound_forward(q_x: f64, q_y: f64, theta_x: f64) -> f64 {
    neg_entropy(q_x) - q_x * theta_x - q_x * q_y.ln()
}

/// y-dependent part of the backward-inference bound for one dimension:
/// `q_y ln q_y + (1 − q_y) ln(1 − q_y) − q_y θ_y − (1 − q_y) ln(1 − q_x)`.
pub fn bound_backward(q_y: f64, q_x: f64, theta_y: f64) -> f64 {
    neg_entropy(q_y) - q_y * theta_y - (1.0 - q_y) * (-q_x).ln_1p()
}

/// Minimizer of `f` over the interior grid `i / (n + 1)`, `i = 1..=n`.
pub fn grid_argmin(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    (1..=n)
        .map(|i| i as f64 / (n + 1) as f64)
        .map(|q| (q, f(q)))
        .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
        .0
}
