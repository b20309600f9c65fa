//! Hyponymy-detection evaluation: pair datasets, the two accuracy metrics,
//! baseline scorers, lexically disjoint cross-validation folds and report
//! emission.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::format::fixed4;
use crate::interp::{pair_score, Interpretation};
use crate::operators::Operator;
use crate::par::{self, Exec};
use crate::trainer::{self, MappedOp, TrainConfig};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WordPair {
    pub hypo: String,
    pub hyper: String,
    /// `true` when `hypo` is a hyponym of `hyper`.
    pub label: bool,
}

impl WordPair {
    pub fn new(hypo: impl Into<String>, hyper: impl Into<String>, label: bool) -> Self {
        WordPair { hypo: hypo.into(), hyper: hyper.into(), label }
    }
}

/// One cross-validation split.
#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Training pairs dropped for sharing a word with the test set.
    pub removed: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WordPairDataset {
    pairs: Vec<WordPair>,
    folds: Option<Vec<Fold>>,
}

impl WordPairDataset {
    pub fn new(pairs: Vec<WordPair>) -> Self {
        WordPairDataset { pairs, folds: None }
    }

    pub fn pairs(&self) -> &[WordPair] {
        &self.pairs
    }

    pub fn folds(&self) -> Option<&[Fold]> {
        self.folds.as_deref()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn load_pairs(path: &Path) -> Result<WordPairDataset> {
    read_pairs(BufReader::new(File::open(path)?))
}

/// Parses `hypo<TAB>hyper<TAB>label` lines. Labels are `1`/`0` or
/// `True`/`False`; blank lines are skipped.
pub fn read_pairs<R: BufRead>(reader: R) -> Result<WordPairDataset> {
    let mut pairs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [hypo, hyper, label] = cols[..] else {
            return Err(Error::Parse { line: lineno, msg: format!("expected 3 columns, found {}", cols.len()) });
        };
        let label = match label.trim() {
            "1" => true,
            "0" => false,
            l if l.eq_ignore_ascii_case("true") => true,
            l if l.eq_ignore_ascii_case("false") => false,
            other => return Err(Error::Parse { line: lineno, msg: format!("bad label {other:?}") }),
        };
        let (hypo, hyper) = (hypo.trim(), hyper.trim());
        if hypo.is_empty() || hyper.is_empty() || hypo == hyper {
            return Err(Error::Parse { line: lineno, msg: format!("invalid word pair ({hypo:?}, {hyper:?})") });
        }
        pairs.push(WordPair::new(hypo, hyper, label));
    }
    Ok(WordPairDataset::new(pairs))
}

/// Accuracy when exactly the top `⌊n/2⌋` scores are predicted positive.
///
/// Items are ranked by descending score with ties kept in input order.
/// Returns the accuracy and the score of the last predicted positive
/// (`+∞` when nothing is predicted positive).
pub fn fifty_percent_accuracy(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { left: scores.len(), right: labels.len() });
    }
    if scores.is_empty() {
        return Err(Error::InvalidConfig("cannot threshold an empty score list".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let positives = scores.len() / 2;
    let correct = order
        .iter()
        .enumerate()
        .filter(|&(rank, &i)| (rank < positives) == labels[i])
        .count();
    let threshold = match positives {
        0 => f64::INFINITY,
        p => scores[order[p - 1]],
    };
    Ok((correct as f64 / scores.len() as f64, threshold))
}

/// Fraction of pairs whose forward score beats the reversed score, with
/// half credit for exact ties. `0.5` for an empty list.
pub fn direction_accuracy_from_scores(forward: &[f64], reversed: &[f64]) -> f64 {
    if forward.is_empty() {
        return 0.5;
    }
    let credit: f64 = forward
        .iter()
        .zip(reversed)
        .map(|(f, r)| match f.partial_cmp(r) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Equal) => 0.5,
            _ => 0.0,
        })
        .sum();
    credit / forward.len() as f64
}

/// Direction accuracy of `score(hypo, hyper)` over positive pairs.
pub fn direction_accuracy<F>(positives: &[WordPair], score: F) -> Result<f64>
where
    F: Fn(&str, &str) -> Result<f64>,
{
    let mut fwd = Vec::with_capacity(positives.len());
    let mut rev = Vec::with_capacity(positives.len());
    for p in positives {
        if !p.label {
            return Err(Error::InvalidConfig(format!(
                "direction accuracy needs positive pairs, got ({}, {})",
                p.hypo, p.hyper
            )));
        }
        fwd.push(score(&p.hypo, &p.hyper)?);
        rev.push(score(&p.hyper, &p.hypo)?);
    }
    Ok(direction_accuracy_from_scores(&fwd, &rev))
}

fn vocabulary<'a>(pairs: impl Iterator<Item = &'a WordPair>) -> HashSet<&'a str> {
    pairs.flat_map(|p| [p.hypo.as_str(), p.hyper.as_str()]).collect()
}

/// `k` shuffled, near-equal test sets. Each fold's training set drops every
/// pair sharing a word with that fold's test pairs.
pub fn make_folds(dataset: &WordPairDataset, k: usize, seed: u64) -> Result<WordPairDataset> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    if dataset.folds.is_some() {
        return Err(Error::InvalidConfig("dataset already has folds".into()));
    }
    let n = dataset.pairs.len();
    if n < k {
        return Err(Error::InvalidConfig(format!("{n} pairs cannot fill {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for index in 0..k {
        let size = base + usize::from(index < extra);
        let mut test: Vec<usize> = order[start..start + size].to_vec();
        test.sort_unstable();
        start += size;

        let test_set: HashSet<usize> = test.iter().copied().collect();
        let test_vocab = vocabulary(test.iter().map(|&i| &dataset.pairs[i]));
        let mut removed = 0;
        let train: Vec<usize> = (0..n)
            .filter(|i| !test_set.contains(i))
            .filter(|&i| {
                let p = &dataset.pairs[i];
                let keep = !test_vocab.contains(p.hypo.as_str()) && !test_vocab.contains(p.hyper.as_str());
                removed += usize::from(!keep);
                keep
            })
            .collect();

        let train_vocab = vocabulary(train.iter().map(|&i| &dataset.pairs[i]));
        assert!(
            train_vocab.is_disjoint(&test_vocab),
            "fold {index}: training and test vocabularies overlap"
        );
        folds.push(Fold { index, train, test, removed });
    }
    Ok(WordPairDataset { pairs: dataset.pairs.clone(), folds: Some(folds) })
}

/// Untrained similarity baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Dot,
    Cosine,
    /// Summed difference, hypernym minus hyponym.
    Dif,
    /// Cosine with extra weight on the hypernym's largest dimensions.
    WeightedCos,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Dot => "dot",
            Baseline::Cosine => "cos",
            Baseline::Dif => "dif",
            Baseline::WeightedCos => "wcos",
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Linear rank weights `w_k = (D − rank_k)/D`, where `rank_k` is the 0-based
/// descending rank of `hyper[k]`.
pub fn rank_weights(hyper: &[f64]) -> Vec<f64> {
    let d = hyper.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| hyper[b].total_cmp(&hyper[a]));
    let mut w = vec![0.0; d];
    for (rank, &k) in order.iter().enumerate() {
        w[k] = (d - rank) as f64 / d as f64;
    }
    w
}

pub fn baseline_score(kind: Baseline, hypo: &[f64], hyper: &[f64]) -> Result<f64> {
    if hypo.len() != hyper.len() {
        return Err(Error::DimensionMismatch { left: hypo.len(), right: hyper.len() });
    }
    match kind {
        Baseline::Dot => Ok(dot(hypo, hyper)),
        Baseline::Dif => Ok(hyper.iter().zip(hypo).map(|(g, h)| g - h).sum()),
        Baseline::Cosine => {
            let norms = dot(hypo, hypo).sqrt() * dot(hyper, hyper).sqrt();
            if norms == 0.0 {
                return Err(Error::ZeroVector);
            }
            Ok(dot(hypo, hyper) / norms)
        }
        Baseline::WeightedCos => {
            let w = rank_weights(hyper);
            let wdot = |a: &[f64], b: &[f64]| -> f64 {
                w.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
            };
            let norms = wdot(hypo, hypo).sqrt() * wdot(hyper, hyper).sqrt();
            if norms == 0.0 {
                return Err(Error::ZeroVector);
            }
            Ok(wdot(hypo, hyper) / norms)
        }
    }
}

/// A scoring method as named in reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Entail { interp: Interpretation, op: Operator },
    Baseline(Baseline),
    /// Trained linear mapping, evaluated by cross-validation.
    Mapped(MappedOp),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Entail { interp, op } => format!("{}-{}", interp.name(), op.name()),
            Method::Baseline(b) => b.name().to_string(),
            Method::Mapped(op) => format!("mapped-{}", op.name()),
        }
    }

    pub fn is_mapped(&self) -> bool {
        matches!(self, Method::Mapped(_))
    }

    /// Unsupervised score for `hypo ⇒ hyper`. Mapped methods need a trained
    /// model and are rejected here.
    pub fn score(&self, hypo: &[f64], hyper: &[f64]) -> Result<f64> {
        match *self {
            Method::Entail { interp, op } => pair_score(hypo, hyper, interp, op).map(|s| s.value()),
            Method::Baseline(b) => baseline_score(b, hypo, hyper),
            Method::Mapped(_) => Err(Error::InvalidConfig(format!("{} needs training", self.name()))),
        }
    }

    /// Parses a comma-separated list of method names.
    pub fn parse_list(list: &str) -> Result<Vec<Method>> {
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownMethod(s.to_string());
        match s {
            "dot" => return Ok(Method::Baseline(Baseline::Dot)),
            "cos" => return Ok(Method::Baseline(Baseline::Cosine)),
            "dif" => return Ok(Method::Baseline(Baseline::Dif)),
            "wcos" => return Ok(Method::Baseline(Baseline::WeightedCos)),
            _ => {}
        }
        if let Some(op) = s.strip_prefix("mapped-") {
            return op.parse().map(Method::Mapped).map_err(|_| unknown());
        }
        let (interp, op) = s.rsplit_once('-').ok_or_else(unknown)?;
        Ok(Method::Entail {
            interp: interp.parse().map_err(|_| unknown())?,
            op: op.parse().map_err(|_| unknown())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub acc50: f64,
    pub dir_acc: f64,
    /// Score threshold behind `acc50`; for mapped methods the mean of the
    /// per-fold probability thresholds.
    pub threshold: f64,
    pub n_scored: usize,
    pub n_dropped_oov: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

impl EvalReport {
    pub fn row(&self, method: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,acc50,dir_acc,threshold,n,oov_dropped\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method,
                fixed4(r.acc50),
                fixed4(r.dir_acc),
                fixed4(r.threshold),
                r.n_scored,
                r.n_dropped_oov
            ));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let header = ["method", "50% acc", "dir acc", "threshold", "n", "oov"];
        let cells: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.method.clone(),
                    fixed4(r.acc50),
                    fixed4(r.dir_acc),
                    fixed4(r.threshold),
                    r.n_scored.to_string(),
                    r.n_dropped_oov.to_string(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let mut line = |cols: Vec<&str>| {
            let parts: Vec<String> = cols
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            out.push_str(parts.join("  ").trim_end());
            out.push('\n');
        };
        line(header.to_vec());
        for row in &cells {
            line(row.iter().map(String::as_str).collect());
        }
        out
    }
}

/// What to evaluate and how.
#[derive(Debug, Clone)]
pub struct EvalRequest {
    pub methods: Vec<Method>,
    /// Cross-validation folds for mapped methods.
    pub folds: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub exec: Exec,
}

impl Default for EvalRequest {
    fn default() -> Self {
        EvalRequest {
            methods: Vec::new(),
            folds: 10,
            seed: 0,
            train: TrainConfig::default(),
            exec: Exec::default(),
        }
    }
}

struct Resolved {
    hypo: Vec<f64>,
    hyper: Vec<f64>,
    label: bool,
}

/// Scores every in-vocabulary pair with each requested method and computes
/// both metrics. Pairs with an out-of-vocabulary word are dropped and
/// counted.
pub fn run_eval(table: &EmbeddingTable, dataset: &WordPairDataset, req: &EvalRequest) -> Result<EvalReport> {
    if req.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }
    let (kept, dropped): (Vec<&WordPair>, Vec<&WordPair>) = dataset
        .pairs
        .iter()
        .partition(|p| table.contains(&p.hypo) && table.contains(&p.hyper));
    if kept.is_empty() {
        return Err(Error::AllPairsOov);
    }
    let resolved: Vec<Resolved> = kept
        .iter()
        .map(|p| Resolved {
            hypo: table.lookup(&p.hypo).expect("checked"),
            hyper: table.lookup(&p.hyper).expect("checked"),
            label: p.label,
        })
        .collect();
    let labels: Vec<bool> = resolved.iter().map(|r| r.label).collect();
    let n_dropped_oov = dropped.len();

    let mut rows = Vec::with_capacity(req.methods.len());
    let mut folded: Option<WordPairDataset> = None;
    for method in &req.methods {
        let row = match method {
            Method::Mapped(op) => {
                if folded.is_none() {
                    let in_vocab = WordPairDataset::new(kept.iter().map(|&p| p.clone()).collect());
                    folded = Some(make_folds(&in_vocab, req.folds, req.seed)?);
                }
                mapped_row(method, *op, folded.as_ref().expect("folded"), &resolved, table, req, n_dropped_oov)?
            }
            _ => {
                let scored: Vec<Result<(f64, f64)>> = par::map(req.exec, &resolved, |r| {
                    let fwd = method.score(&r.hypo, &r.hyper)?;
                    let rev = if r.label { method.score(&r.hyper, &r.hypo)? } else { f64::NAN };
                    Ok((fwd, rev))
                });
                let scored = scored.into_iter().collect::<Result<Vec<_>>>()?;
                let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
                let (acc50, threshold) = fifty_percent_accuracy(&scores, &labels)?;
                let (fwd, rev): (Vec<f64>, Vec<f64>) =
                    scored.iter().zip(&labels).filter(|(_, &l)| l).map(|(s, _)| *s).unzip();
                ReportRow {
                    method: method.name(),
                    acc50,
                    dir_acc: direction_accuracy_from_scores(&fwd, &rev),
                    threshold,
                    n_scored: resolved.len(),
                    n_dropped_oov,
                }
            }
        };
        rows.push(row);
    }
    Ok(EvalReport { rows })
}

fn mapped_row(
    method: &Method,
    op: MappedOp,
    folded: &WordPairDataset,
    resolved: &[Resolved],
    table: &EmbeddingTable,
    req: &EvalRequest,
    n_dropped_oov: usize,
) -> Result<ReportRow> {
    let cfg = TrainConfig { seed: req.seed.wrapping_add(req.train.seed), ..req.train };
    let models = trainer::train(folded, table, &cfg, op, req.exec)?;
    let folds = folded.folds().expect("folds");
    let mut correct = 0.0;
    let mut thresholds = 0.0;
    let (mut fwd, mut rev) = (Vec::new(), Vec::new());
    for (fold, trained) in folds.iter().zip(&models) {
        let model = &trained.model;
        let mut probs = Vec::with_capacity(fold.test.len());
        let mut labels = Vec::with_capacity(fold.test.len());
        for &i in &fold.test {
            let r = &resolved[i];
            probs.push(model.predict(&r.hypo, &r.hyper)?);
            labels.push(r.label);
            if r.label {
                fwd.push(model.raw_score(&r.hypo, &r.hyper)?);
                rev.push(model.raw_score(&r.hyper, &r.hypo)?);
            }
        }
        let (acc, threshold) = fifty_percent_accuracy(&probs, &labels)?;
        correct += acc * probs.len() as f64;
        thresholds += threshold;
    }
    Ok(ReportRow {
        method: method.name(),
        acc50: correct / resolved.len() as f64,
        dir_acc: direction_accuracy_from_scores(&fwd, &rev),
        threshold: thresholds / folds.len() as f64,
        n_scored: resolved.len(),
        n_dropped_oov,
    })
}
