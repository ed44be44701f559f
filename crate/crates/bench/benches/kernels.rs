use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use imcf_bench::ellipsoid;
use imcf_core::flow::step;
use imcf_core::spectral::assemble;
use imcf_core::{compute_tensors, lambda1_laplace, lambda1_plaplace, PLaplaceConfig, SpeedFunction};

fn tensors(c: &mut Criterion) {
    let mut g = c.benchmark_group("compute_tensors");
    for level in [2, 3, 4] {
        let s = ellipsoid(level);
        g.bench_with_input(BenchmarkId::from_parameter(level), &s, |b, s| {
            b.iter(|| compute_tensors(black_box(s)).unwrap())
        });
    }
    g.finish();
}

fn flow_step(c: &mut Criterion) {
    let s = ellipsoid(3);
    let t = compute_tensors(&s).unwrap();
    c.bench_function("imcf_step/3", |b| {
        b.iter(|| step(black_box(&s), &t, &SpeedFunction::Imcf, 1e-3).unwrap())
    });
}

fn laplace(c: &mut Criterion) {
    let mut g = c.benchmark_group("lambda1_laplace");
    g.sample_size(20);
    for level in [2, 3, 4] {
        let s = ellipsoid(level);
        let op = assemble(&s, &compute_tensors(&s).unwrap()).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(level), &op, |b, op| {
            b.iter(|| lambda1_laplace(black_box(op), 1e-10).unwrap())
        });
    }
    g.finish();
}

fn plaplace(c: &mut Criterion) {
    let mut g = c.benchmark_group("lambda1_plaplace");
    g.sample_size(10);
    let s = ellipsoid(3);
    let t = compute_tensors(&s).unwrap();
    for p in [1.5, 3.0] {
        let cfg = PLaplaceConfig::with_p(p);
        g.bench_with_input(BenchmarkId::from_parameter(p), &cfg, |b, cfg| {
            b.iter(|| lambda1_plaplace(&s, &t, black_box(cfg)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, tensors, flow_step, laplace, plaplace);
criterion_main!(benches);
