//! Reading raw word embeddings as entailment log-odds.
//!
//! Three readings are supported: the raw vector taken directly as log-odds,
//! a negated duplicate that gives known-true and known-false features their
//! own dimensions, and the duplicate shifted down so that values near zero
//! carry probability mass for "unknown".
//!
//! The module also carries the word-in-context model used to compare each
//! reading's training gradient with the skip-gram gradient.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernels::{log_sigmoid, sigmoid};
use crate::operators::{entail_backward, Operator};
use crate::par::{self, Exec};
use crate::vector::{EntailmentScore, LogOddsVector};

pub const DEFAULT_SHIFT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterpKind {
    LogOdds,
    Dup,
    UnkDup,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpretation {
    kind: InterpKind,
    shift: f64,
}

impl Interpretation {
    pub fn log_odds() -> Self {
        Interpretation { kind: InterpKind::LogOdds, shift: 0.0 }
    }

    pub fn dup() -> Self {
        Interpretation { kind: InterpKind::Dup, shift: 0.0 }
    }

    pub fn unk_dup(shift: f64) -> Result<Self> {
        if !(shift > 0.0 && shift.is_finite()) {
            return Err(Error::InvalidShift(shift));
        }
        Ok(Interpretation { kind: InterpKind::UnkDup, shift })
    }

    pub fn kind(&self) -> InterpKind {
        self.kind
    }

    /// Offset subtracted from both halves; zero unless `UnkDup`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            InterpKind::LogOdds => "logodds",
            InterpKind::Dup => "dup",
            InterpKind::UnkDup => "unkdup",
        }
    }

    pub fn output_dim(&self, raw_dim: usize) -> usize {
        match self.kind {
            InterpKind::LogOdds => raw_dim,
            InterpKind::Dup | InterpKind::UnkDup => 2 * raw_dim,
        }
    }

    /// Maps a raw vector into log-odds space without validation.
    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        match self.kind {
            InterpKind::LogOdds => raw.to_vec(),
            InterpKind::Dup | InterpKind::UnkDup => {
                let s = self.shift;
                raw.iter()
                    .map(|&v| v - s)
                    .chain(raw.iter().map(|&v| -v - s))
                    .collect()
            }
        }
    }

    /// Pulls a gradient in log-odds space back to the raw vector,
    /// accumulating into `out`.
    pub fn pull_back(&self, grad: &[f64], out: &mut [f64]) {
        match self.kind {
            InterpKind::LogOdds => {
                for (o, g) in out.iter_mut().zip(grad) {
                    *o += g;
                }
            }
            InterpKind::Dup | InterpKind::UnkDup => {
                let d = out.len();
                for (k, o) in out.iter_mut().enumerate() {
                    *o += grad[k] - grad[d + k];
                }
            }
        }
    }
}

impl Default for Interpretation {
    fn default() -> Self {
        Interpretation::log_odds()
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Interpretation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logodds" | "log-odds" => Ok(Interpretation::log_odds()),
            "dup" => Ok(Interpretation::dup()),
            "unkdup" | "unk-dup" => Interpretation::unk_dup(DEFAULT_SHIFT),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

pub fn transform(raw: &[f64], interp: Interpretation) -> Result<LogOddsVector> {
    LogOddsVector::new(interp.apply(raw))
}

/// Score for "hypo is a hyponym of hyper": the hyponym plays the entailing
/// vector `y`, the hypernym the entailed vector `x`.
pub fn pair_score(
    hypo_raw: &[f64],
    hyper_raw: &[f64],
    interp: Interpretation,
    op: Operator,
) -> Result<EntailmentScore> {
    if hypo_raw.len() != hyper_raw.len() {
        return Err(Error::DimensionMismatch { left: hypo_raw.len(), right: hyper_raw.len() });
    }
    let y = transform(hypo_raw, interp)?;
    let x = transform(hyper_raw, interp)?;
    op.score(&y, &x)
}

/// Middle word, context word and context prior of the word-in-context model.
#[derive(Debug, Clone)]
pub struct ContextModelInputs {
    middle: LogOddsVector,
    context: LogOddsVector,
    context_prior: LogOddsVector,
}

impl ContextModelInputs {
    pub fn new(
        middle: LogOddsVector,
        context: LogOddsVector,
        context_prior: LogOddsVector,
    ) -> Result<Self> {
        for other in [&context, &context_prior] {
            if other.dim() != middle.dim() {
                return Err(Error::DimensionMismatch { left: middle.dim(), right: other.dim() });
            }
        }
        Ok(ContextModelInputs { middle, context, context_prior })
    }

    /// Zero prior, the default when only embeddings are observable.
    pub fn without_prior(middle: LogOddsVector, context: LogOddsVector) -> Result<Self> {
        let prior = LogOddsVector::zeros(middle.dim())?;
        Self::new(middle, context, prior)
    }

    pub fn middle(&self) -> &LogOddsVector {
        &self.middle
    }

    /// `X_c' = θ_c − log σ(−X_c)`: the context word combined with what its
    /// prior lets us infer from it.
    pub fn context_prime(&self) -> Vec<f64> {
        self.context_prior
            .iter()
            .zip(self.context.iter())
            .map(|(&t, &c)| t - log_sigmoid(-c))
            .collect()
    }
}

/// Hidden unification vector; `minus` is present for duplicated readings.
#[derive(Debug, Clone, PartialEq)]
pub struct Unified {
    pub plus: LogOddsVector,
    pub minus: Option<LogOddsVector>,
}

// (u, v) pairs for each half: u is the effective middle value entering the
// ⊳ term, v the matching context value.
fn halves(inputs: &ContextModelInputs, interp: Interpretation) -> Vec<(Vec<f64>, Vec<f64>)> {
    let cp = inputs.context_prime();
    let m = inputs.middle.values();
    let s = interp.shift;
    match interp.kind {
        InterpKind::LogOdds => vec![(m.to_vec(), cp)],
        InterpKind::Dup | InterpKind::UnkDup => {
            let plus_u = m.iter().map(|&x| x - s).collect();
            let minus_u = m.iter().map(|&x| -x - s).collect();
            let minus_v = cp.iter().map(|&v| -v).collect();
            vec![(plus_u, cp), (minus_u, minus_v)]
        }
    }
}

/// Backward inference of the hidden vector from middle and context words.
pub fn unify_backward(inputs: &ContextModelInputs, interp: Interpretation) -> Result<Unified> {
    let mut hidden = halves(inputs, interp).into_iter().map(|(u, v)| {
        LogOddsVector::new(
            u.iter()
                .zip(&v)
                .map(|(&uk, &vk)| vk - log_sigmoid(-uk))
                .collect(),
        )
    });
    let plus = hidden.next().expect("at least one half")?;
    let minus = hidden.next().transpose()?;
    Ok(Unified { plus, minus })
}

/// Approximate log-probability that the unified hidden vector entails both
/// the middle and the context word.
pub fn context_score(inputs: &ContextModelInputs, interp: Interpretation) -> Result<f64> {
    let unified = unify_backward(inputs, interp)?;
    let hidden = std::iter::once(unified.plus).chain(unified.minus);
    let mut total = 0.0;
    for (y, (u, v)) in hidden.zip(halves(inputs, interp)) {
        total += entail_backward(&y, &LogOddsVector::new(u)?)?.value();
        total -= y.iter().zip(&v).map(|(&yk, &vk)| sigmoid(-yk) * vk).sum::<f64>();
    }
    Ok(total)
}

/// Analytic gradient of [`context_score`] with respect to the middle vector.
///
/// Per half the score is `−Y·σ(−Y)` with `Y = v − log σ(−u)`, giving
/// `∂/∂u = σ(u)·σ(−Y)·(Y·σ(Y) − 1)`.
pub fn context_score_grad_middle(inputs: &ContextModelInputs, interp: Interpretation) -> Vec<f64> {
    let mut grad = vec![0.0; inputs.middle.dim()];
    for (half, (u, v)) in halves(inputs, interp).into_iter().enumerate() {
        let sign = if half == 0 { 1.0 } else { -1.0 };
        for (k, g) in grad.iter_mut().enumerate() {
            let y = v[k] - log_sigmoid(-u[k]);
            *g += sign * sigmoid(u[k]) * sigmoid(-y) * (y * sigmoid(y) - 1.0);
        }
    }
    grad
}

/// Central-difference gradient of [`context_score`] with respect to the
/// middle vector, step `h`.
pub fn context_score_grad_middle_fd(
    inputs: &ContextModelInputs,
    interp: Interpretation,
    h: f64,
) -> Result<Vec<f64>> {
    let mut grad = Vec::with_capacity(inputs.middle.dim());
    for k in 0..inputs.middle.dim() {
        let shifted = |delta: f64| -> Result<f64> {
            let mut m = inputs.middle.values().to_vec();
            m[k] += delta;
            let moved = ContextModelInputs {
                middle: LogOddsVector::new(m)?,
                ..inputs.clone()
            };
            context_score(&moved, interp)
        };
        grad.push((shifted(h)? - shifted(-h)?) / (2.0 * h));
    }
    Ok(grad)
}

/// Models compared on the training-gradient grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GradientModel {
    /// Skip-gram positive-sample objective `log σ(x_m·x_c)`.
    Word2Vec,
    LogOddsBwd,
    DupBwd,
    UnkDupBwd,
}

impl GradientModel {
    pub const ALL: [GradientModel; 4] = [
        GradientModel::Word2Vec,
        GradientModel::LogOddsBwd,
        GradientModel::DupBwd,
        GradientModel::UnkDupBwd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GradientModel::Word2Vec => "word2vec",
            GradientModel::LogOddsBwd => "logodds-bwd",
            GradientModel::DupBwd => "dup-bwd",
            GradientModel::UnkDupBwd => "unkdup-bwd",
        }
    }

    /// `d score / d x_m` on a one-dimensional instance with zero context
    /// prior. `shift` only affects `UnkDupBwd`.
    pub fn gradient(self, m: f64, c: f64, shift: f64) -> Result<f64> {
        let interp = match self {
            GradientModel::Word2Vec => return Ok(sigmoid(-m * c) * c),
            GradientModel::LogOddsBwd => Interpretation::log_odds(),
            GradientModel::DupBwd => Interpretation::dup(),
            GradientModel::UnkDupBwd => Interpretation::unk_dup(shift)?,
        };
        let inputs = ContextModelInputs::without_prior(
            LogOddsVector::new(vec![m])?,
            LogOddsVector::new(vec![c])?,
        )?;
        Ok(context_score_grad_middle(&inputs, interp)[0])
    }
}

impl FromStr for GradientModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GradientModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// Inclusive arithmetic range `lo, lo+step, …, ≤ hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridRange {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi < lo {
            return Err(Error::InvalidConfig(format!(
                "grid range ({lo}, {hi}, {step}) needs finite bounds, lo <= hi and step > 0"
            )));
        }
        Ok(GridRange { lo, hi, step })
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub m: f64,
    pub c: f64,
    pub gradient: f64,
}

/// Gradient grid, row-major over `m` then `c`.
pub fn gradient_grid(
    model: GradientModel,
    m_range: GridRange,
    c_range: GridRange,
    shift: f64,
) -> Result<Vec<GridPoint>> {
    gradient_grid_with(Exec::default(), model, m_range, c_range, shift)
}

pub fn gradient_grid_with(
    exec: Exec,
    model: GradientModel,
    m_range: GridRange,
    c_range: GridRange,
    shift: f64,
) -> Result<Vec<GridPoint>> {
    let cols = c_range.len();
    par::map_range(exec, m_range.len() * cols, |idx| {
        let m = m_range.point(idx / cols);
        let c = c_range.point(idx % cols);
        model.gradient(m, c, shift).map(|gradient| GridPoint { m, c, gradient })
    })
    .into_iter()
    .collect()
}

/// CSV with header `m,c,gradient`, values at 9 significant digits.
pub fn write_grid_csv<W: std::io::Write>(mut out: W, grid: &[GridPoint]) -> std::io::Result<()> {
    use crate::format::sig9;
    writeln!(out, "m,c,gradient")?;
    for p in grid {
        writeln!(out, "{},{},{}", sig9(p.m), sig9(p.c), sig9(p.gradient))?;
    }
    Ok(())
}
