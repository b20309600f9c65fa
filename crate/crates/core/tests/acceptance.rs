//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! criterion fails. Criteria 8 and 9 need the GoogleNews vectors and the
//! BLESS pair file, given by `ENTAIL_GOOGLENEWS` and `ENTAIL_BLESS`; without
//! them they report SKIP.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use entailment::eval::{self, direction_accuracy, make_folds, EvalReport, EvalRequest, Method, WordPair, WordPairDataset};
use entailment::inference::{graph_infer, EntailmentGraph, SolverConfig};
use entailment::interp::{gradient_grid, GradientModel, GridRange, DEFAULT_SHIFT};
use entailment::kernels::sigmoid;
use entailment::oracle::{bound_backward, bound_forward, exact_entail_prob, grid_argmin, DiscreteDistribution};
use entailment::trainer::{loss_and_grad, Example, MappedOp, MappingModel};
use entailment::{embeddings, entail_backward, entail_factorized, entail_forward, Interpretation, LogOddsVector, ProbVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::{Fail, Pass, Skip};

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn within_budget(outcome: Outcome, elapsed: Duration, budget: Option<Duration>) -> Outcome {
    match (outcome, budget) {
        (Pass(d), Some(b)) if elapsed > b => Fail(format!("{d}; took {elapsed:.2?}, budget {b:?}")),
        (o, _) => o,
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn lv(v: Vec<f64>) -> LogOddsVector {
    LogOddsVector::new(v).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let dim = rng.gen_range(1..=12);
        let qx: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.001..0.999)).collect();
        let qy: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.001..0.999)).collect();
        let px = DiscreteDistribution::from_factorized(&ProbVector::new(qx.clone()).unwrap()).unwrap();
        let py = DiscreteDistribution::from_factorized(&ProbVector::new(qy.clone()).unwrap()).unwrap();
        let exact = exact_entail_prob(&px, &py).unwrap();
        let x = ProbVector::new(qx).unwrap().to_log_odds().unwrap();
        let y = ProbVector::new(qy).unwrap().to_log_odds().unwrap();
        let approx = entail_factorized(&y, &x).unwrap().probability();
        worst = worst.max((approx - exact).abs());
    }
    check(worst <= 1e-9, format!("max |exp(fact) - exact| = {worst:.3e}"))
}

fn jensen_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    let mut not_strict = 0;
    for _ in 0..100_000 {
        let x = lv((0..50).map(|_| rng.gen_range(-10.0..10.0)).collect());
        let y = lv((0..50).map(|_| rng.gen_range(-10.0..10.0)).collect());
        let fact = entail_factorized(&y, &x).unwrap().value();
        let fwd = entail_forward(&x, &y).unwrap().value();
        let bwd = entail_backward(&y, &x).unwrap().value();
        violations += usize::from(fwd > fact + 1e-12) + usize::from(bwd > fact + 1e-12);
        // every sigmoid of a finite input in [-10, 10] lies strictly inside (0, 1)
        not_strict += usize::from(fwd >= fact) + usize::from(bwd >= fact);
    }
    check(
        violations == 0 && not_strict == 0,
        format!("{violations} bound violations, {not_strict} non-strict cases over 1e5 pairs"),
    )
}

fn mean_field_optimality() -> Outcome {
    const N: usize = 10_000;
    let step = 1.0 / (N + 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let theta = rng.gen_range(-5.0..5.0);
        let q = rng.gen_range(0.01..0.99);
        let fwd_closed = sigmoid(theta + f64::ln(q));
        let fwd_grid = grid_argmin(N, |qx| bound_forward(qx, q, theta));
        let bwd_closed = sigmoid(theta - (-q).ln_1p());
        let bwd_grid = grid_argmin(N, |qy| bound_backward(qy, q, theta));
        worst = worst.max((fwd_closed - fwd_grid).abs()).max((bwd_closed - bwd_grid).abs());
    }
    check(worst <= step, format!("max distance {worst:.3e}, grid step {step:.3e}"))
}

fn graph_fixed_point() -> Outcome {
    let mut g = EntailmentGraph::new();
    g.add_node("a", lv(vec![0.0])).unwrap();
    g.add_node("b", lv(vec![0.0])).unwrap();
    g.add_entail("a", "b").unwrap();
    let cfg = SolverConfig { max_sweeps: 100, ..SolverConfig::default() };
    let res = match graph_infer(&g, &cfg) {
        Ok(r) => r,
        Err(e) => return Fail(e.to_string()),
    };
    let ln_phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    let (a, b) = (res.get("a").unwrap()[0], res.get("b").unwrap()[0]);
    let err = (a - ln_phi).abs().max((b + ln_phi).abs());
    check(
        res.converged && res.sweeps_used <= 100 && err <= 1e-6,
        format!("a = {a:.6}, b = {b:.6} after {} sweeps (error {err:.1e})", res.sweeps_used),
    )
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

fn trainer_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let interps = [Interpretation::log_odds(), Interpretation::dup(), Interpretation::unk_dup(DEFAULT_SHIFT).unwrap()];
    let h = 1e-6;
    let l2 = 1e-3;
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let op = MappedOp::ALL[i % MappedOp::ALL.len()];
        let (d_in, d_out) = (rng.gen_range(2..5), rng.gen_range(2..5));
        let w: Vec<f64> = (0..d_in * d_out).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let mut model = MappingModel::from_weights(d_out, d_in, w, rng.gen_range(-1.0..1.0), op).unwrap();
        model.interp = interps[i % interps.len()];
        let examples: Vec<Example> = (0..6)
            .map(|_| Example {
                hypo: (0..d_in).map(|_| rng.gen_range(-1.5..1.5)).collect(),
                hyper: (0..d_in).map(|_| rng.gen_range(-1.5..1.5)).collect(),
                label: rng.gen_bool(0.5),
            })
            .collect();
        let batch: Vec<&Example> = examples.iter().collect();
        let loss_at = |m: &MappingModel| loss_and_grad(m, &batch, l2).unwrap().loss;
        let analytic = loss_and_grad(&model, &batch, l2).unwrap();
        for j in 0..model.weights().len() {
            let mut plus = model.clone();
            plus.weights_mut()[j] += h;
            let mut minus = model.clone();
            minus.weights_mut()[j] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            worst = worst.max(relative_error(analytic.grad_w[j], numeric));
        }
        let mut plus = model.clone();
        plus.tau += h;
        let mut minus = model.clone();
        minus.tau -= h;
        let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
        worst = worst.max(relative_error(analytic.grad_tau, numeric));
    }
    check(worst < 1e-4, format!("max relative error {worst:.3e} over 20 models"))
}

fn harness_metrics() -> Outcome {
    let dir = fixtures();
    let table = embeddings::load(&dir.join("toy.txt"), None).unwrap();
    let pairs = eval::load_pairs(&dir.join("toy_pairs.tsv")).unwrap();
    let golden = std::fs::read_to_string(dir.join("toy_golden.csv")).unwrap();
    let names: Vec<&str> = golden.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let req = EvalRequest {
        methods: names.iter().map(|n| n.parse().unwrap()).collect(),
        ..EvalRequest::default()
    };
    let csv = eval::run_eval(&table, &pairs, &req).unwrap().to_csv();
    let golden_ok = csv == golden;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vecs: Vec<Vec<f64>> = (0..40).map(|_| (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let positives: Vec<WordPair> = (0..39).map(|i| WordPair::new(format!("{i}"), format!("{}", i + 1), true)).collect();
    let dot: Method = "dot".parse().unwrap();
    let sym = direction_accuracy(&positives, |h, g| {
        dot.score(&vecs[h.parse::<usize>().unwrap()], &vecs[g.parse::<usize>().unwrap()])
    })
    .unwrap();

    let mut folds_checked = 0;
    let mut overlaps = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw = Vec::new();
        for _ in 0..rng.gen_range(10..80) {
            let (a, b) = (rng.gen_range(0..25), rng.gen_range(0..25));
            if a != b {
                raw.push(WordPair::new(format!("w{a}"), format!("w{b}"), rng.gen_bool(0.5)));
            }
        }
        let k = rng.gen_range(2..=10).min(raw.len());
        let ds = make_folds(&WordPairDataset::new(raw), k, seed).unwrap();
        for f in ds.folds().unwrap() {
            let vocab = |idx: &[usize]| -> std::collections::HashSet<String> {
                idx.iter().flat_map(|&i| [ds.pairs()[i].hypo.clone(), ds.pairs()[i].hyper.clone()]).collect()
            };
            overlaps += usize::from(!vocab(&f.train).is_disjoint(&vocab(&f.test)));
            folds_checked += 1;
        }
    }
    check(
        golden_ok && sym == 0.5 && overlaps == 0,
        format!(
            "golden {}, dot dir acc {sym}, {overlaps} overlapping of {folds_checked} folds",
            if golden_ok { "equal" } else { "DIFFERS" }
        ),
    )
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn gradient_correlation() -> Outcome {
    let range = GridRange::new(-4.0, 4.0, 0.1).unwrap();
    let grid = |m: GradientModel| -> Vec<f64> {
        gradient_grid(m, range, range, DEFAULT_SHIFT).unwrap().into_iter().map(|p| p.gradient).collect()
    };
    let reference = grid(GradientModel::Word2Vec);
    let r = |m| pearson(&grid(m), &reference);
    let (unk, dup, lo) = (r(GradientModel::UnkDupBwd), r(GradientModel::DupBwd), r(GradientModel::LogOddsBwd));
    check(unk > dup && dup > lo, format!("r(unkdup) = {unk:.3}, r(dup) = {dup:.3}, r(logodds) = {lo:.3}"))
}

fn reference_data() -> Option<(PathBuf, PathBuf)> {
    let vectors = std::env::var_os("ENTAIL_GOOGLENEWS")?;
    let pairs = std::env::var_os("ENTAIL_BLESS")?;
    Some((vectors.into(), pairs.into()))
}

fn run_reference_eval(methods: &str) -> Result<EvalReport, String> {
    let (vectors, pairs) = reference_data().ok_or("set ENTAIL_GOOGLENEWS and ENTAIL_BLESS")?;
    let table = embeddings::load(&vectors, None).map_err(|e| e.to_string())?;
    let ds = eval::load_pairs(&pairs).map_err(|e| e.to_string())?;
    let req = EvalRequest { methods: Method::parse_list(methods).map_err(|e| e.to_string())?, ..EvalRequest::default() };
    eval::run_eval(&table, &ds, &req).map_err(|e| e.to_string())
}

fn unsupervised_table() -> Outcome {
    if reference_data().is_none() {
        return Skip("ENTAIL_GOOGLENEWS / ENTAIL_BLESS not set".into());
    }
    let report = match run_reference_eval("logodds-bwd,dup-bwd,unkdup-bwd") {
        Ok(r) => r,
        Err(e) => return Fail(e),
    };
    let acc = |m: &str| report.row(m).unwrap().acc50;
    let unk = report.row("unkdup-bwd").unwrap();
    let ok = (unk.acc50 - 0.645).abs() <= 0.015
        && (unk.dir_acc - 0.688).abs() <= 0.020
        && (acc("logodds-bwd") - 0.601).abs() <= 0.015
        && acc("logodds-bwd") < acc("dup-bwd")
        && acc("dup-bwd") < unk.acc50;
    check(
        ok,
        format!(
            "unkdup 50% {:.4} dir {:.4}, dup {:.4}, logodds {:.4}",
            unk.acc50,
            unk.dir_acc,
            acc("dup-bwd"),
            acc("logodds-bwd")
        ),
    )
}

fn semi_supervised_table() -> Outcome {
    if reference_data().is_none() {
        return Skip("ENTAIL_GOOGLENEWS / ENTAIL_BLESS not set".into());
    }
    let report = match run_reference_eval("mapped-bwd,mapped-fact,mapped-fwd,mapped-dif") {
        Ok(r) => r,
        Err(e) => return Fail(e),
    };
    let acc = |m: &str| report.row(m).unwrap().acc50;
    let dif = acc("mapped-dif");
    let ok = (acc("mapped-bwd") - 0.801).abs() <= 0.03
        && (acc("mapped-fact") - 0.775).abs() <= 0.03
        && ["mapped-bwd", "mapped-fact", "mapped-fwd"].iter().all(|m| dif < acc(m));
    check(
        ok,
        format!(
            "bwd {:.4}, fact {:.4}, fwd {:.4}, dif {dif:.4}",
            acc("mapped-bwd"),
            acc("mapped-fact"),
            acc("mapped-fwd")
        ),
    )
}

type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", Some(5), oracle_equivalence),
        ("Jensen bounds", Some(5), jensen_bounds),
        ("mean-field update optimality", Some(10), mean_field_optimality),
        ("graph fixed point", None, graph_fixed_point),
        ("trainer gradients", Some(10), trainer_gradients),
        ("harness metrics", None, harness_metrics),
        ("gradient correlation ordering", None, gradient_correlation),
        ("unsupervised reproduction", None, unsupervised_table),
        ("semi-supervised reproduction", None, semi_supervised_table),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = within_budget(outcome, elapsed, budget.map(Duration::from_secs));
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("criterion {}: {tag} {name}: {detail} [{elapsed:.2?}]", i + 1);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
