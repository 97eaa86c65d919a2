use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wcs_core::geometry::DerivativeEngine;
use wcs_core::ktensor::build_k_general;
use wcs_core::suite::{fill_nodes, grid_fill, Context};
use wcs_core::{build_k, riemann_at, ContractionSchedule, RunConfig};

fn kernels(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let ctx = Context::new(&cfg).unwrap();
    let engine = DerivativeEngine::series();
    let schedule = ContractionSchedule::cyclic(3);
    let x = ctx.entry.random_points(1, 7)[0].clone();
    let curv = riemann_at(&ctx.entry.metric, &x, &engine).unwrap();

    c.bench_function("curvature", |b| b.iter(|| riemann_at(&ctx.entry.metric, black_box(&x), &engine).unwrap()));
    c.bench_function("k/cyclic", |b| b.iter(|| build_k(black_box(&curv), &schedule).unwrap()));
    c.bench_function("k/general-table", |b| b.iter(|| build_k_general(black_box(&curv), &schedule).unwrap()));

    let nodes = fill_nodes(&ctx).unwrap();
    let mut group = c.benchmark_group("grid-fill");
    group.sample_size(10);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    for workers in [1, cores.max(2)] {
        group.bench_with_input(BenchmarkId::from_parameter(workers), &workers, |b, &w| {
            b.iter(|| grid_fill(&ctx, &nodes, w).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
