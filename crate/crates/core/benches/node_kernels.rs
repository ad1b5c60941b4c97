//! Node kernels on the default rayon pool versus a one-thread pool. Built
//! without the `parallel` feature both variants run the sequential path.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spencer_core::elliptic::assemble_operator;
use spencer_core::fixtures::{default_diffeo, pullback_structure};
use spencer_core::holomorphy::holo_residual;
use spencer_core::structures::nijenhuis_residual;
use spencer_core::{ComplexField, DiffMode, Patch};

fn run<F: FnOnce() + Send>(pool: Option<&rayon::ThreadPool>, work: F) {
    match pool {
        Some(p) => p.install(work),
        None => work(),
    }
}

fn kernels(c: &mut Criterion) {
    let patch = Arc::new(Patch::cube(4, -0.5, 0.5, 11).unwrap());
    let acs = pullback_structure(&patch, &default_diffeo(4)).unwrap();
    let f = ComplexField::parse(&patch, "x1*x3 - x2*x4", "x1*x4 + x2*x3").unwrap();
    let sequential = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();

    let mut group = c.benchmark_group("node_kernels");
    group.sample_size(10);
    for (pool, label) in [(None, "default_pool"), (Some(&sequential), "one_thread")] {
        group.bench_function(BenchmarkId::new("holo_residual", label), |b| {
            b.iter(|| run(pool, || { black_box(holo_residual(&acs, &f, DiffMode::Exact).unwrap()); }))
        });
        group.bench_function(BenchmarkId::new("nijenhuis", label), |b| {
            b.iter(|| run(pool, || { black_box(nijenhuis_residual(&acs, DiffMode::Exact).unwrap()); }))
        });
        group.bench_function(BenchmarkId::new("assemble_operator", label), |b| {
            b.iter(|| run(pool, || { black_box(assemble_operator(&acs, DiffMode::Exact).unwrap()); }))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
