//! Semi-supervised linear mappings into a space where an entailment
//! operator (or the summed difference) separates hyponym pairs.
//!
//! A pair `(hypo, hyper)` is scored by mapping both raw vectors through the
//! shared matrix `W`, applying the operator to the mapped vectors and
//! passing `s − tau` through a logistic link. Training minimizes mean binary
//! cross-entropy with plain mini-batch gradient descent.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{WordPair, WordPairDataset};
use crate::interp::Interpretation;
use crate::kernels::{log_sigmoid, sigmoid};
use crate::operators::Operator;
use crate::par::{self, Exec};

/// Scoring function applied in the mapped space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MappedOp {
    Entail(Operator),
    /// `Σ_k (hyper_k − hypo_k)`.
    Dif,
}

impl MappedOp {
    pub const ALL: [MappedOp; 4] = [
        MappedOp::Entail(Operator::Backward),
        MappedOp::Entail(Operator::Factorized),
        MappedOp::Entail(Operator::Forward),
        MappedOp::Dif,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MappedOp::Entail(op) => op.name(),
            MappedOp::Dif => "dif",
        }
    }
}

impl fmt::Display for MappedOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MappedOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dif" => Ok(MappedOp::Dif),
            other => other.parse().map(MappedOp::Entail),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingModel {
    d_out: usize,
    d_in: usize,
    /// Row-major `d_out × d_in`.
    w: Vec<f64>,
    pub tau: f64,
    pub interp: Interpretation,
    pub op: MappedOp,
}

/// `W` uniform in `±1/√d_in` from a seeded generator; `tau = 0` until
/// [`MappingModel::calibrate`] is called.
pub fn init_mapping(d_in: usize, d_out: usize, seed: u64, op: MappedOp) -> Result<MappingModel> {
    if d_in == 0 || d_out == 0 {
        return Err(Error::InvalidConfig("mapping dimensions must be positive".into()));
    }
    let bound = 1.0 / (d_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (0..d_out * d_in).map(|_| dist.sample(&mut rng)).collect();
    Ok(MappingModel { d_out, d_in, w, tau: 0.0, interp: Interpretation::log_odds(), op })
}

/// A labelled pair of raw vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub hypo: Vec<f64>,
    pub hyper: Vec<f64>,
    pub label: bool,
}

impl MappingModel {
    pub fn from_weights(d_out: usize, d_in: usize, w: Vec<f64>, tau: f64, op: MappedOp) -> Result<Self> {
        if d_out == 0 || d_in == 0 || w.len() != d_out * d_in {
            return Err(Error::InvalidConfig(format!(
                "weights of length {} do not form a {d_out}×{d_in} matrix",
                w.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) || !tau.is_finite() {
            return Err(Error::InvalidConfig("mapping entries must be finite".into()));
        }
        Ok(MappingModel { d_out, d_in, w, tau, interp: Interpretation::log_odds(), op })
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.w[r * self.d_in..(r + 1) * self.d_in]
    }

    /// `W·v`.
    pub fn map(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.d_in {
            return Err(Error::DimensionMismatch { left: self.d_in, right: v.len() });
        }
        Ok((0..self.d_out)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Operator score in the mapped space, before the link.
    pub fn raw_score(&self, hypo: &[f64], hyper: &[f64]) -> Result<f64> {
        let u = self.map(hypo)?;
        let v = self.map(hyper)?;
        Ok(self.score_mapped(&u, &v))
    }

    fn score_mapped(&self, u: &[f64], v: &[f64]) -> f64 {
        match self.op {
            MappedOp::Dif => v.iter().zip(u).map(|(a, b)| a - b).sum(),
            MappedOp::Entail(op) => {
                let y = self.interp.apply(u);
                let x = self.interp.apply(v);
                y.iter().zip(&x).map(|(&yk, &xk)| op.term(yk, xk)).sum()
            }
        }
    }

    // (∂s/∂u, ∂s/∂v)
    fn score_grad_mapped(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.op {
            MappedOp::Dif => (vec![-1.0; u.len()], vec![1.0; v.len()]),
            MappedOp::Entail(op) => {
                let y = self.interp.apply(u);
                let x = self.interp.apply(v);
                let (gy, gx): (Vec<f64>, Vec<f64>) =
                    y.iter().zip(&x).map(|(&yk, &xk)| op.term_grad(yk, xk)).unzip();
                let mut du = vec![0.0; u.len()];
                let mut dv = vec![0.0; v.len()];
                self.interp.pull_back(&gy, &mut du);
                self.interp.pull_back(&gx, &mut dv);
                (du, dv)
            }
        }
    }

    /// `σ(s − tau)`.
    pub fn predict(&self, hypo: &[f64], hyper: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.raw_score(hypo, hyper)? - self.tau))
    }

    /// Sets `tau` to the mean raw score of `batch`.
    pub fn calibrate(&mut self, batch: &[&Example]) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let mut total = 0.0;
        for ex in batch {
            total += self.raw_score(&ex.hypo, &ex.hyper)?;
        }
        self.tau = total / batch.len() as f64;
        Ok(())
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum()
    }

    /// Writes `d_out d_in tau op` followed by one line per row of `W`.
    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {} {} {}", self.d_out, self.d_in, self.tau, self.op)?;
        for r in 0..self.d_out {
            let line: Vec<String> = self.row(r).iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let bad = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [d_out, d_in, tau, op] = fields[..] else {
            return Err(bad(1, "expected `d_out d_in tau op`"));
        };
        let d_out: usize = d_out.parse().map_err(|_| bad(1, "bad d_out"))?;
        let d_in: usize = d_in.parse().map_err(|_| bad(1, "bad d_in"))?;
        let tau: f64 = tau.parse().map_err(|_| bad(1, "bad tau"))?;
        let op: MappedOp = op.parse().map_err(|_| bad(1, "unknown op"))?;
        let mut w = Vec::with_capacity(d_out * d_in);
        for r in 0..d_out {
            let (n, line) = lines.next().ok_or_else(|| bad(r + 2, "missing weight row"))?;
            let line = line?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(n + 1, "unparsable weight"))?;
            if row.len() != d_in {
                return Err(bad(n + 1, "wrong row length"));
            }
            w.extend(row);
        }
        MappingModel::from_weights(d_out, d_in, w, tau, op)
    }
}

/// Loss and gradients for one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad_w: Vec<f64>,
    pub grad_tau: f64,
}

/// Mean binary cross-entropy of `σ(s − tau)` over the batch plus
/// `l2·‖W‖²`, with analytic gradients through the operator, the
/// interpretation and the shared mapping.
pub fn loss_and_grad(model: &MappingModel, batch: &[&Example], l2: f64) -> Result<LossGrad> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    let n = batch.len() as f64;
    let d_in = model.d_in;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; model.w.len()];
    let mut grad_tau = 0.0;
    for ex in batch {
        let u = model.map(&ex.hypo)?;
        let v = model.map(&ex.hyper)?;
        let z = model.score_mapped(&u, &v) - model.tau;
        let t = if ex.label { 1.0 } else { 0.0 };
        loss -= t * log_sigmoid(z) + (1.0 - t) * log_sigmoid(-z);
        let dz = (sigmoid(z) - t) / n;
        grad_tau -= dz;
        let (du, dv) = model.score_grad_mapped(&u, &v);
        for r in 0..model.d_out {
            let (a, b) = (dz * du[r], dz * dv[r]);
            let row = &mut grad_w[r * d_in..(r + 1) * d_in];
            for ((g, &h), &e) in row.iter_mut().zip(&ex.hypo).zip(&ex.hyper) {
                *g += a * h + b * e;
            }
        }
    }
    loss /= n;
    loss += l2 * model.l2_norm_sq();
    for (g, w) in grad_w.iter_mut().zip(&model.w) {
        *g += 2.0 * l2 * w;
    }
    Ok(LossGrad { loss, grad_w, grad_tau })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub step_size: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub l2: f64,
    /// Output dimension of the mapping; `None` keeps the input dimension.
    pub d_out: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { step_size: 0.05, epochs: 50, batch_size: 32, seed: 0, l2: 1e-5, d_out: None }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig("step size must be positive".into()));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::InvalidConfig("epochs and batch size must be at least 1".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::InvalidConfig("l2 must be non-negative".into()));
        }
        if self.d_out == Some(0) {
            return Err(Error::InvalidConfig("d_out must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: MappingModel,
    /// Mean batch loss per epoch.
    pub history: Vec<f64>,
}

/// Mini-batch gradient descent on `examples`; the batch order is reshuffled
/// every epoch from `cfg.seed`.
pub fn train_examples(examples: &[Example], op: MappedOp, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    let d_in = examples
        .first()
        .map(|e| e.hypo.len())
        .ok_or(Error::EmptyTrainingFold { fold: 0 })?;
    let d_out = cfg.d_out.unwrap_or(d_in);
    let mut model = init_mapping(d_in, d_out, cfg.seed, op)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x05ee_d0fb_a7c4);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &examples[i]).collect();
            if epoch == 0 && batches == 0 {
                model.calibrate(&batch)?;
            }
            let lg = loss_and_grad(&model, &batch, cfg.l2)?;
            if !lg.loss.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "training diverged in epoch {epoch}; lower the step size"
                )));
            }
            epoch_loss += lg.loss;
            batches += 1;
            for (w, g) in model.w.iter_mut().zip(&lg.grad_w) {
                *w -= cfg.step_size * g;
            }
            model.tau -= cfg.step_size * lg.grad_tau;
        }
        history.push(epoch_loss / batches as f64);
    }
    Ok(TrainedModel { model, history })
}

/// Trains one model per fold of `dataset` on its filtered training pairs.
///
/// Pairs with an out-of-vocabulary word are skipped. Fold `f` uses seed
/// `cfg.seed + f`; folds are independent, so they may train concurrently
/// without affecting the result.
pub fn train(
    dataset: &WordPairDataset,
    table: &EmbeddingTable,
    cfg: &TrainConfig,
    op: MappedOp,
    exec: Exec,
) -> Result<Vec<TrainedModel>> {
    cfg.validate()?;
    let folds = dataset
        .folds()
        .ok_or_else(|| Error::InvalidConfig("dataset has no folds".into()))?;
    par::map(exec, folds, |fold| {
        let examples: Vec<Example> = fold
            .train
            .iter()
            .filter_map(|&i| Example::resolve(&dataset.pairs()[i], table))
            .collect();
        if examples.is_empty() {
            return Err(Error::EmptyTrainingFold { fold: fold.index });
        }
        let fold_cfg = TrainConfig { seed: cfg.seed.wrapping_add(fold.index as u64), ..*cfg };
        train_examples(&examples, op, &fold_cfg)
    })
    .into_iter()
    .collect()
}

impl Example {
    /// Looks both words up; `None` if either is out of vocabulary.
    pub fn resolve(pair: &WordPair, table: &EmbeddingTable) -> Option<Example> {
        Some(Example {
            hypo: table.lookup(&pair.hypo)?,
            hyper: table.lookup(&pair.hyper)?,
            label: pair.label,
        })
    }
}
