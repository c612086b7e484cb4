use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ffsense_bench::instance;
use ffsense_core::frames::coherence;
use ffsense_core::measurement::Normalization;
use ffsense_core::rip::{exact_frip, mc_frip};
use ffsense_core::solver::{solve_equality, solve_noisy};
use ffsense_core::SolverParams;
use std::hint::black_box;

fn operator(c: &mut Criterion) {
    let mut g = c.benchmark_group("operator_apply");
    for &n in &[16, 64, 256] {
        let inst = instance(32, 4, n, 4, 16, 1);
        g.bench_with_input(BenchmarkId::new("forward", n), &inst, |bch, i| bch.iter(|| i.b.apply(black_box(&i.c))));
        g.bench_with_input(BenchmarkId::new("adjoint", n), &inst, |bch, i| bch.iter(|| i.b.adjoint(black_box(&i.y))));
    }
    g.finish();
}

fn recovery(c: &mut Criterion) {
    let params = SolverParams::default();
    let mut g = c.benchmark_group("recovery");
    g.sample_size(20);
    for &(n, s, m) in &[(16, 2, 6), (64, 4, 12)] {
        let inst = instance(16, 2, n, s, m, 7);
        let id = format!("N={n},s={s},m={m}");
        g.bench_with_input(BenchmarkId::new("equality", &id), &inst, |bch, i| {
            bch.iter(|| solve_equality(&i.b, black_box(&i.y), &params).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("noisy", &id), &inst, |bch, i| {
            bch.iter(|| solve_noisy(&i.b, black_box(&i.y), 1e-3, &params).unwrap())
        });
    }
    g.finish();
}

fn rip(c: &mut Criterion) {
    let mut g = c.benchmark_group("frip");
    g.sample_size(20);
    let inst = instance(8, 2, 12, 2, 6, 3);
    for s in 1..=3 {
        g.bench_with_input(BenchmarkId::new("exact", s), &s, |bch, &s| {
            bch.iter(|| exact_frip(&inst.a, &inst.collection, s, Normalization::InvSqrtRows).unwrap())
        });
    }
    g.bench_function("monte_carlo_s3_1000", |bch| {
        bch.iter(|| mc_frip(&inst.a, &inst.collection, 3, 1000, 9, Normalization::InvSqrtRows).unwrap())
    });
    g.finish();
}

fn frames(c: &mut Criterion) {
    let mut g = c.benchmark_group("coherence");
    for &n in &[16, 64] {
        let inst = instance(24, 4, n, 1, 4, 5);
        g.bench_with_input(BenchmarkId::from_parameter(n), &inst, |bch, i| {
            bch.iter(|| coherence(&i.collection).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, operator, recovery, rip, frames);
criterion_main!(benches);
