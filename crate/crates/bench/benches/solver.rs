use std::hint::black_box;

use annihilator_bench::{disjoint_tapers, mixed, monomials};
use annihilator_core::corrector::{build_bump_basis, jacobian, q_vector};
use annihilator_core::func::dependence_bounds;
use annihilator_core::partition::solve_partition;
use annihilator_core::phase::{build_g0, mollify};
use annihilator_core::{
    solve_annihilating_phase, PartitionOptions, QuadratureOptions, SolveOptions,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_partition(c: &mut Criterion) {
    let mut group = c.benchmark_group("partition");
    for n in 1..=4 {
        let fset = monomials(n);
        group.bench_with_input(BenchmarkId::new("monomials", n), &fset, |b, f| {
            b.iter(|| solve_partition(black_box(f), &PartitionOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_dependence(c: &mut Criterion) {
    let quad = QuadratureOptions::default();
    let fset = mixed(3);
    c.bench_function("dependence_bounds/mixed3", |b| {
        b.iter(|| dependence_bounds(black_box(&fset), 256, 1e-8, &quad).unwrap())
    });
}

fn bench_corrector(c: &mut Criterion) {
    let quad = QuadratureOptions::default();
    let fset = mixed(2);
    let popts = PartitionOptions::default();
    let p = 0.5;
    let left = solve_partition(&fset.restrict(0.0, p).unwrap(), &popts).unwrap();
    let right = solve_partition(&fset.restrict(p, 1.0).unwrap(), &popts).unwrap();
    let g0 = build_g0(&left, &right).unwrap();
    let eps = g0.min_gap() / 8.0;
    let phase = mollify(&g0, eps).unwrap();
    let basis = build_bump_basis(&fset, &g0, p, 2.0 * eps, 0, &quad).unwrap();
    let u = vec![0.1; basis.bumps.len()];

    let mut group = c.benchmark_group("corrector");
    group.bench_function("q_vector", |b| {
        b.iter(|| q_vector(&fset, &phase, &basis, black_box(&u), &quad).unwrap())
    });
    group.bench_function("jacobian", |b| {
        b.iter(|| jacobian(&fset, &phase, &basis, black_box(&u), &quad).unwrap())
    });
    group.finish();
}

fn bench_solve(c: &mut Criterion) {
    let opts = SolveOptions::default();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for n in 1..=3 {
        let fset = mixed(n);
        group.bench_with_input(BenchmarkId::new("mixed", n), &fset, |b, f| {
            b.iter(|| solve_annihilating_phase(black_box(f), &opts).unwrap())
        });
    }
    let tapers = disjoint_tapers();
    group.bench_function("disjoint_tapers", |b| {
        b.iter(|| solve_annihilating_phase(black_box(&tapers), &opts).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_partition,
    bench_dependence,
    bench_corrector,
    bench_solve
);
criterion_main!(benches);
