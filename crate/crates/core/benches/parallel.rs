use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use entailment::embeddings::EmbeddingTable;
use entailment::eval::{self, EvalRequest, Method, WordPair, WordPairDataset};
use entailment::interp::{gradient_grid_with, pair_score, GradientModel, GridRange, DEFAULT_SHIFT};
use entailment::par::{self, Exec};
use entailment::{Interpretation, Operator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect()
}

fn pair_scoring(c: &mut Criterion) {
    let hypo = random_vectors(20_000, 300, 1);
    let hyper = random_vectors(20_000, 300, 2);
    let pairs: Vec<(&Vec<f64>, &Vec<f64>)> = hypo.iter().zip(&hyper).collect();
    let interp = Interpretation::unk_dup(DEFAULT_SHIFT).unwrap();
    let mut group = c.benchmark_group("pair_scoring");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("unkdup-bwd", name), |b| {
            b.iter(|| par::map(exec, &pairs, |(h, g)| pair_score(h, g, interp, Operator::Backward).unwrap().value()))
        });
    }
    group.finish();
}

fn gradient_grid(c: &mut Criterion) {
    let range = GridRange::new(-4.0, 4.0, 0.01).unwrap();
    let mut group = c.benchmark_group("gradient_grid");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("unkdup-bwd", name), |b| {
            b.iter(|| gradient_grid_with(exec, GradientModel::UnkDupBwd, range, range, black_box(DEFAULT_SHIFT)).unwrap())
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let vectors = random_vectors(2_000, 100, 3);
    let table = EmbeddingTable::from_rows(
        100,
        vectors.iter().enumerate().map(|(i, v)| (format!("w{i}"), v.iter().map(|&x| x as f32).collect())),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pairs = (0..10_000)
        .map(|_| {
            let (a, b) = (rng.gen_range(0..1000), rng.gen_range(1000..2000));
            WordPair::new(format!("w{a}"), format!("w{b}"), rng.gen_bool(0.5))
        })
        .collect();
    let dataset = WordPairDataset::new(pairs);
    let methods = Method::parse_list("logodds-fwd,logodds-fact,logodds-bwd,dup-bwd,unkdup-fact,unkdup-bwd,wcos").unwrap();
    let mut group = c.benchmark_group("evaluation");
    group.sample_size(20);
    for (name, exec) in MODES {
        let req = EvalRequest { methods: methods.clone(), exec, ..EvalRequest::default() };
        group.bench_function(BenchmarkId::new("unsupervised", name), |b| {
            b.iter(|| eval::run_eval(&table, &dataset, &req).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pair_scoring, gradient_grid, evaluation);
criterion_main!(benches);
