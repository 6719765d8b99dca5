use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spsn::inference::{evaluate_batch, Mode};
use spsn::learn::{backward, init_params};
use spsn::sample::sample_labeled;
use spsn::{classify, mask_missing, parse_document, spsn_network, BuildConfig, Circuit, DataTree, Schema};

const SCHEMA: &str = include_str!("../../../demo/schema.json");
const CORPUS: &str = include_str!("../../../demo/molecules.jsonl");

fn setup(n_l: usize, n_s: usize, n_c: usize) -> (Circuit, Vec<DataTree>) {
    let schema = Schema::from_json(SCHEMA).unwrap();
    let trees: Vec<DataTree> = CORPUS
        .lines()
        .take(100)
        .map(|l| parse_document(l, &schema).unwrap())
        .collect();
    let config = BuildConfig {
        n_c,
        n_l,
        n_s,
        ..BuildConfig::default()
    };
    let mut c = spsn_network(&schema, &config).unwrap();
    init_params(&mut c, &trees, 0);
    (c, trees)
}

fn density(cr: &mut Criterion) {
    let mut g = cr.benchmark_group("log_density_100_docs");
    for (n_l, n_s) in [(1, 2), (2, 2), (2, 4), (3, 2)] {
        let (c, trees) = setup(n_l, n_s, 1);
        g.bench_with_input(BenchmarkId::new("n_l/n_s", format!("{n_l}/{n_s}")), &trees, |b, t| {
            b.iter(|| evaluate_batch(black_box(&c), 0, t, Mode::Density))
        });
    }
    g.finish();
}

fn marginal(cr: &mut Criterion) {
    let (c, trees) = setup(2, 2, 1);
    let masked: Vec<DataTree> = trees.iter().enumerate().map(|(i, t)| mask_missing(t, 0.5, i as u64)).collect();
    cr.bench_function("marginal_100_docs_half_missing", |b| {
        b.iter(|| evaluate_batch(black_box(&c), 0, &masked, Mode::Marginal))
    });
}

fn gradient(cr: &mut Criterion) {
    let (c, trees) = setup(2, 2, 1);
    cr.bench_function("backward_one_doc", |b| {
        b.iter(|| backward(black_box(&c), 0, &trees[0]).unwrap())
    });
}

fn classification(cr: &mut Criterion) {
    let (c, trees) = setup(2, 2, 2);
    cr.bench_function("classify_one_doc_two_classes", |b| {
        b.iter(|| classify(black_box(&c), &trees[0]).unwrap())
    });
}

fn sampling(cr: &mut Criterion) {
    let (c, _) = setup(2, 2, 1);
    cr.bench_function("sample_100_docs", |b| b.iter(|| sample_labeled(black_box(&c), 100, 7)));
}

criterion_group!(benches, density, marginal, gradient, classification, sampling);
criterion_main!(benches);
