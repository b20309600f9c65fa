//! The three vector-space entailment operators.
//!
//! Each operator approximates `log P(y ⇒ x)`: `y` is the entailing vector
//! (the hyponym, which knows more) and `x` the entailed one. All operators
//! are sums of independent per-dimension terms.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernels::{log_add_exp, log_sigmoid, sigmoid};
use crate::vector::{EntailmentScore, LogOddsVector};

/// Operator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    /// `X <○ Y = σ(X)·log σ(Y)`, from forward inference.
    Forward,
    /// `Y >○ X = σ(−Y)·log σ(−X)`, from backward inference.
    Backward,
    /// `Y ⇒̃ X = Σ log(1 − σ(−Y)σ(X))`, exact under factorized marginals.
    Factorized,
}

impl Operator {
    pub const ALL: [Operator; 3] = [Operator::Forward, Operator::Backward, Operator::Factorized];

    pub fn name(self) -> &'static str {
        match self {
            Operator::Forward => "fwd",
            Operator::Backward => "bwd",
            Operator::Factorized => "fact",
        }
    }

    /// Per-dimension term for entailing value `y` and entailed value `x`.
    #[inline]
    pub fn term(self, y: f64, x: f64) -> f64 {
        match self {
            Operator::Forward => sigmoid(x) * log_sigmoid(y),
            Operator::Backward => sigmoid(-y) * log_sigmoid(-x),
            Operator::Factorized => factorized_term(y, x),
        }
    }

    /// Partial derivatives `(∂/∂y, ∂/∂x)` of [`Operator::term`].
    #[inline]
    pub fn term_grad(self, y: f64, x: f64) -> (f64, f64) {
        match self {
            Operator::Forward => {
                let sx = sigmoid(x);
                (sx * sigmoid(-y), sx * sigmoid(-x) * log_sigmoid(y))
            }
            Operator::Backward => {
                let sny = sigmoid(-y);
                (-sny * sigmoid(y) * log_sigmoid(-x), -sny * sigmoid(x))
            }
            Operator::Factorized => {
                let a = sigmoid(-y);
                let b = sigmoid(x);
                let den = factorized_term(y, x).exp();
                (a * sigmoid(y) * b / den, -a * b * sigmoid(-x) / den)
            }
        }
    }

    /// Sum of per-dimension terms over raw slices.
    pub fn score_slices(self, y: &[f64], x: &[f64]) -> Result<f64> {
        check_dims(y.len(), x.len())?;
        Ok(y.iter().zip(x).map(|(&yk, &xk)| self.term(yk, xk)).sum())
    }

    /// Score of `y ⇒ x`.
    pub fn score(self, y: &LogOddsVector, x: &LogOddsVector) -> Result<EntailmentScore> {
        self.score_slices(y, x).map(EntailmentScore::new)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fwd" | "forward" => Ok(Operator::Forward),
            "bwd" | "backward" => Ok(Operator::Backward),
            "fact" | "factorized" => Ok(Operator::Factorized),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

// log(1 − σ(−y)σ(x)). The complement 1 − ab equals σ(y) + σ(−y)σ(−x), which
// is evaluated in log space once ab is large enough for 1 − ab to cancel.
#[inline]
fn factorized_term(y: f64, x: f64) -> f64 {
    let ab = sigmoid(-y) * sigmoid(x);
    if ab < 0.5 {
        (-ab).ln_1p()
    } else {
        log_add_exp(log_sigmoid(y), log_sigmoid(-y) + log_sigmoid(-x))
    }
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

/// `X <○ Y`: forward-inference operator for `y ⇒ x`.
pub fn entail_forward(x: &LogOddsVector, y: &LogOddsVector) -> Result<EntailmentScore> {
    check_dims(x.dim(), y.dim())?;
    Operator::Forward.score(y, x)
}

/// `Y >○ X`: backward-inference operator for `y ⇒ x`.
pub fn entail_backward(y: &LogOddsVector, x: &LogOddsVector) -> Result<EntailmentScore> {
    Operator::Backward.score(y, x)
}

/// `Y ⇒̃ X`: factorized log entailment probability.
pub fn entail_factorized(y: &LogOddsVector, x: &LogOddsVector) -> Result<EntailmentScore> {
    Operator::Factorized.score(y, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(values: &[f64]) -> LogOddsVector {
        LogOddsVector::new(values.to_vec()).unwrap()
    }

    const HALF_LN_HALF: f64 = -0.346_573_590_279_972_6;

    #[test]
    fn forward_reference_values() {
        assert_relative_eq!(entail_forward(&v(&[0.0]), &v(&[0.0])).unwrap().value(), HALF_LN_HALF);
        let s = entail_forward(&v(&[-40.0]), &v(&[-3.0])).unwrap().value();
        assert!(s <= 0.0 && s > -1e-15);
    }

    #[test]
    fn backward_reference_values() {
        assert_relative_eq!(entail_backward(&v(&[0.0]), &v(&[0.0])).unwrap().value(), HALF_LN_HALF);
        let s = entail_backward(&v(&[40.0]), &v(&[5.0])).unwrap().value();
        assert!(s > -1e-15);
        assert_relative_eq!(
            entail_backward(&v(&[0.0]), &v(&[40.0])).unwrap().value(),
            -20.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn factorized_reference_values() {
        let one = entail_factorized(&v(&[0.0]), &v(&[0.0])).unwrap().value();
        assert_relative_eq!(one, 0.75f64.ln(), epsilon = 1e-15);
        let two = entail_factorized(&v(&[0.0, 0.0]), &v(&[0.0, 0.0])).unwrap().value();
        assert_relative_eq!(two, 2.0 * 0.75f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn factorized_stays_finite_at_extremes() {
        // 1 − σ(40)σ(40) rounds to zero in direct evaluation
        let s = entail_factorized(&v(&[-40.0]), &v(&[40.0])).unwrap().value();
        let expected = (2.0 * (-40f64).exp()).ln();
        assert_relative_eq!(s, expected, max_relative = 1e-9);
        let s = entail_factorized(&v(&[-700.0]), &v(&[700.0])).unwrap().value();
        assert!(s.is_finite());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = entail_forward(&v(&[0.0]), &v(&[0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { left: 1, right: 2 }));
        assert!(entail_backward(&v(&[0.0, 1.0]), &v(&[0.0])).is_err());
        assert!(entail_factorized(&v(&[0.0, 1.0]), &v(&[0.0])).is_err());
    }

    #[test]
    fn term_gradients_match_central_differences() {
        let h = 1e-6;
        for &op in &Operator::ALL {
            for &(y, x) in &[(0.3, -0.7), (-2.0, 1.5), (4.0, 3.0), (-6.0, -1.0)] {
                let (gy, gx) = op.term_grad(y, x);
                let fy = (op.term(y + h, x) - op.term(y - h, x)) / (2.0 * h);
                let fx = (op.term(y, x + h) - op.term(y, x - h)) / (2.0 * h);
                assert_relative_eq!(gy, fy, max_relative = 1e-6, epsilon = 1e-10);
                assert_relative_eq!(gx, fx, max_relative = 1e-6, epsilon = 1e-10);
            }
        }
    }

    fn pair(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-10.0f64..10.0, dim),
            prop::collection::vec(-10.0f64..10.0, dim),
        )
    }

    proptest! {
        #[test]
        fn jensen_bounds((x, y) in (1usize..40).prop_flat_map(pair)) {
            let (x, y) = (v(&x), v(&y));
            let fact = entail_factorized(&y, &x).unwrap().value();
            prop_assert!(entail_forward(&x, &y).unwrap().value() <= fact + 1e-12);
            prop_assert!(entail_backward(&y, &x).unwrap().value() <= fact + 1e-12);
        }

        #[test]
        fn monotone_in_each_coordinate((x, y) in pair(6), k in 0usize..6, bump in 0.01f64..3.0) {
            for &op in &Operator::ALL {
                let base = op.score_slices(&y, &x).unwrap();
                let mut y_up = y.clone();
                y_up[k] += bump;
                let mut x_up = x.clone();
                x_up[k] += bump;
                prop_assert!(op.score_slices(&y_up, &x).unwrap() >= base - 1e-12);
                prop_assert!(op.score_slices(&y, &x_up).unwrap() <= base + 1e-12);
            }
        }

        #[test]
        fn additive_over_concatenation((x1, y1) in pair(3), (x2, y2) in pair(5)) {
            for &op in &Operator::ALL {
                let whole = op.score(&v(&y1).concat(&v(&y2)), &v(&x1).concat(&v(&x2))).unwrap().value();
                let parts = op.score(&v(&y1), &v(&x1)).unwrap().value()
                    + op.score(&v(&y2), &v(&x2)).unwrap().value();
                prop_assert!((whole - parts).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn vacuity_limits() {
        let free = v(&[1.0, -2.0, 3.5]);
        let unknown = v(&[-60.0; 3]);
        let known = v(&[60.0; 3]);
        for &op in &Operator::ALL {
            assert!(op.score(&free, &unknown).unwrap().value() > -1e-20);
            assert!(op.score(&known, &free).unwrap().value() > -1e-20);
        }
    }
}
