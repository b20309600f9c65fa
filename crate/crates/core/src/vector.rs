use std::ops::Deref;

use crate::error::{Error, Result};
use crate::kernels::{logit, sigmoid};

/// Largest log-odds magnitude accepted from raw inputs by
/// [`LogOddsVector::from_clamped`].
pub const RAW_CLAMP: f64 = 700.0;

/// Per-feature log-odds that the feature is known.
#[derive(Debug, Clone, PartialEq)]
pub struct LogOddsVector(Vec<f64>);

impl LogOddsVector {
    /// Rejects empty vectors and any non-finite entry.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(LogOddsVector(values))
    }

    /// Clamps every entry into `[-RAW_CLAMP, RAW_CLAMP]` first. NaN is still rejected.
    pub fn from_clamped(values: Vec<f64>) -> Result<Self> {
        Self::new(
            values
                .into_iter()
                .map(|v| if v.is_nan() { v } else { v.clamp(-RAW_CLAMP, RAW_CLAMP) })
                .collect(),
        )
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn to_probs(&self) -> ProbVector {
        ProbVector(self.0.iter().map(|&x| sigmoid(x)).collect())
    }

    /// Concatenation; operators are additive across the join.
    pub fn concat(&self, other: &LogOddsVector) -> LogOddsVector {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        LogOddsVector(v)
    }
}

impl Deref for LogOddsVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Factorized marginals `Q(x_k = 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidProbability { index, value });
        }
        Ok(ProbVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Fails when some entry is exactly 0 or 1.
    pub fn to_log_odds(&self) -> Result<LogOddsVector> {
        LogOddsVector::new(self.0.iter().map(|&p| logit(p)).collect())
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Approximate natural-log probability of an entailment; never positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EntailmentScore(f64);

impl EntailmentScore {
    pub(crate) fn new(value: f64) -> Self {
        // rounding can leave a vanishing positive residue
        EntailmentScore(value.min(0.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn probability(self) -> f64 {
        self.0.exp()
    }
}
