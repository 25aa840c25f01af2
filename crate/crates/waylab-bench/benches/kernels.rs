use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use waylab_bench::{channel, hermitian, scenario};
use waylab_core::bounds::{eval_disturbance_bounds, eval_way};
use waylab_core::fixpt::analyze_fixed_points;
use waylab_core::opcore::{eigh, op_norm};
use waylab_core::Tolerance;

fn linear_algebra(c: &mut Criterion) {
    let mut group = c.benchmark_group("linear_algebra");
    for d in [2, 4, 8, 16] {
        let a = hermitian(d);
        group.bench_with_input(BenchmarkId::new("op_norm", d), &a, |b, a| b.iter(|| op_norm(black_box(a))));
        group.bench_with_input(BenchmarkId::new("eigh", d), &a, |b, a| b.iter(|| eigh(black_box(a))));
    }
    group.finish();
}

fn channels(c: &mut Criterion) {
    let tol = Tolerance::default();
    let mut group = c.benchmark_group("channels");
    for d in [2, 3, 4, 6] {
        let phi = channel(d, 3);
        group.bench_with_input(BenchmarkId::new("supermatrix", d), &phi, |b, phi| {
            b.iter(|| black_box(phi).to_supermatrix())
        });
        group.bench_with_input(BenchmarkId::new("fixed_points", d), &phi, |b, phi| {
            b.iter(|| analyze_fixed_points(black_box(phi), &tol).expect("channel"))
        });
    }
    group.finish();
}

fn bounds(c: &mut Criterion) {
    let tol = Tolerance::default();
    let mut group = c.benchmark_group("bounds");
    for (ds, da) in [(2, 2), (2, 3), (3, 3)] {
        let sc = scenario(ds, da);
        let label = format!("{ds}x{da}");
        group.bench_function(BenchmarkId::new("disturbance", &label), |b| {
            b.iter(|| eval_disturbance_bounds(&sc.scheme, &sc.probe, Some(&sc.quantity), false, &tol).expect("bounds"))
        });
        group.bench_function(BenchmarkId::new("way", &label), |b| {
            b.iter(|| eval_way(&sc.scheme, &sc.quantity, Some(&sc.target), false, &tol).expect("bounds"))
        });
    }
    group.finish();
}

criterion_group!(benches, linear_algebra, channels, bounds);
criterion_main!(benches);
