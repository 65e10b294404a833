//! Parallel-vs-sequential benchmarks for the data-parallel hot paths:
//! candidate-battery evaluation, multi-start solving, and the region sweep.
//!
//! The same indexed-map executor runs under a 1-thread pool and the default
//! pool, so the comparison isolates scheduling overhead against speedup.
//! Results are bit-identical either way; see the determinism tests.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use extremal_core::capacity::{bc_region_sweep, BcInstance};
use extremal_core::entropy::EstimatorConfig;
use extremal_core::exec::{self, Parallelism};
use extremal_core::matrix::SymMatrix;
use extremal_core::solver::{solve, ExtremalInstance, SolverConfig};
use extremal_core::verify::{standard_battery, gaussian_optimality_harness, Candidate};

fn modes() -> [(&'static str, Parallelism); 2] {
    [
        ("sequential", Parallelism::Sequential),
        ("parallel", Parallelism::Auto),
    ]
}

fn bench_battery(c: &mut Criterion) {
    let inst = ExtremalInstance::scalar(1.0, 4.0, 3.0, 2.0).unwrap();
    let cands: Vec<Candidate> = standard_battery(7)
        .into_iter()
        .filter(|c| c.dim() == 1)
        .map(|c| c.fitted_to(&inst.s).unwrap())
        .collect();
    let cfg = EstimatorConfig::default();
    let mut group = c.benchmark_group("candidate_battery");
    group.sample_size(10);
    for (name, par) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &par, |b, &par| {
            b.iter(|| {
                exec::scope(par, || {
                    gaussian_optimality_harness(&inst, &cands, &cfg, &SolverConfig::default()).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn bench_solver_restarts(c: &mut Criterion) {
    let kz1 = SymMatrix::from_rows(3, &[1.5, 0.2, -0.1, 0.2, 1.0, 0.3, -0.1, 0.3, 2.0]).unwrap();
    let kz2 = SymMatrix::from_rows(3, &[2.0, -0.3, 0.1, -0.3, 2.5, 0.0, 0.1, 0.0, 1.5]).unwrap();
    let s = SymMatrix::diagonal(&[1.5, 2.0, 1.0]);
    let inst = ExtremalInstance::new(kz1, kz2, s, 2.3).unwrap();
    let mut group = c.benchmark_group("solver_multistart");
    group.sample_size(10);
    for (name, par) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &par, |b, &par| {
            let cfg = SolverConfig {
                parallelism: par,
                ..Default::default()
            };
            b.iter(|| solve(&inst, &cfg).unwrap())
        });
    }
    group.finish();
}

fn bench_region_sweep(c: &mut Criterion) {
    let inst = BcInstance::new(
        SymMatrix::scalar(1.0),
        SymMatrix::scalar(2.0),
        SymMatrix::scalar(4.0),
    )
    .unwrap();
    let mut group = c.benchmark_group("bc_region_sweep");
    group.sample_size(10);
    for (name, par) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &par, |b, &par| {
            let cfg = SolverConfig {
                parallelism: par,
                ..Default::default()
            };
            b.iter(|| bc_region_sweep(&inst, 17, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_battery, bench_solver_restarts, bench_region_sweep);
criterion_main!(benches);
