use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use phaseforge_cli::instance::{lowrank_instance, sparse_instance, unstructured_instance};
use phaseforge_core::solvers::lowrank::{altmin_lowrap, lrpr1_projected_gd};
use phaseforge_core::solvers::sparse::{copram, thresh_wf};
use phaseforge_core::solvers::unstructured::{altmin_phase, twf, wf};
use phaseforge_core::spectral::spectral_init;
use phaseforge_core::{FixedColumnwise, FixedMeasurements, SolverConfig, TruncationRule};

fn spectral(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectral_init");
    for n in [64, 256] {
        let inst = unstructured_instance::<f64>(n, 8 * n, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| spectral_init(&inst.ensemble, &inst.observation, TruncationRule::default()).unwrap())
        });
    }
    group.finish();
}

fn unstructured(c: &mut Criterion) {
    let n = 64;
    let cfg = SolverConfig { max_iters: 100, ..Default::default() };
    let inst = unstructured_instance::<f64>(n, 8 * n, 1).unwrap();
    let (a, y) = (&inst.ensemble, &inst.observation);
    let x0 = spectral_init(a, y, cfg.truncation).unwrap();
    let mut group = c.benchmark_group("unstructured_n64");
    group.bench_function("wf", |b| b.iter(|| wf(a, y, black_box(&x0), &cfg, None).unwrap()));
    group.bench_function("twf", |b| b.iter(|| twf(a, y, black_box(&x0), &cfg, None).unwrap()));
    group.bench_function("altmin_phase", |b| {
        b.iter(|| {
            let mut src = FixedMeasurements::new(a, y).unwrap();
            altmin_phase(&mut src, black_box(&x0), &cfg, None).unwrap()
        })
    });
    group.finish();
}

fn sparse(c: &mut Criterion) {
    let (n, s, m) = (200, 5, 150);
    let cfg = SolverConfig { max_iters: 100, ..Default::default() };
    let inst = sparse_instance::<f64>(n, s, m, 1).unwrap();
    let (a, y) = (&inst.ensemble, &inst.observation);
    let mut group = c.benchmark_group("sparse_n200_s5");
    group.bench_function("thresh_wf", |b| b.iter(|| thresh_wf(a, y, s, &cfg, None, None).unwrap()));
    group.bench_function("copram", |b| {
        b.iter(|| {
            let mut src = FixedMeasurements::new(a, y).unwrap();
            copram(&mut src, s, &cfg, None, None).unwrap()
        })
    });
    group.finish();
}

fn lowrank(c: &mut Criterion) {
    let (n, q, r) = (40, 80, 2);
    let mut group = c.benchmark_group("lowrank_n40_q80_r2");
    group.sample_size(10);
    let inst = lowrank_instance::<f64>(n, q, r, 60, 2.0, 1).unwrap();
    let cfg = SolverConfig { max_iters: 10, ..Default::default() };
    group.bench_function("altmin_lowrap", |b| {
        b.iter(|| {
            let mut src = FixedColumnwise::new(&inst.ensembles, &inst.observations).unwrap();
            altmin_lowrap(&mut src, r, &cfg, None).unwrap()
        })
    });
    let inst = lowrank_instance::<f64>(n, q, r, 80, 2.0, 1).unwrap();
    let cfg = SolverConfig { max_iters: 50, ..Default::default() };
    group.bench_function("lrpr1", |b| {
        b.iter(|| {
            let mut src = FixedColumnwise::new(&inst.ensembles, &inst.observations).unwrap();
            lrpr1_projected_gd(&mut src, r, &cfg, None, None).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, spectral, unstructured, sparse, lowrank);
criterion_main!(benches);
