//! Sequential versus rayon execution of the two batch workloads: the
//! dense-oracle fuzz and a coupling-constant sweep.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gap_minmax::continuation::{linear_grid, nu_sweep, SweepConfig};
use gap_minmax::fuzz::oracle_fuzz;
use gap_minmax::{Execution, SolveOptions};

const STRATEGIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn fuzz_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle_fuzz");
    group.sample_size(10);
    let opts = SolveOptions::default();
    for (name, exec) in STRATEGIES {
        group.bench_with_input(BenchmarkId::new(name, 64), &exec, |b, &exec| {
            b.iter(|| oracle_fuzz(64, 8, 4..=24, 7, &opts, exec).expect("fuzz run"))
        });
    }
    group.finish();
}

fn coupling_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("nu_sweep");
    group.sample_size(10);
    let grid = linear_grid(0.0, 0.9, 0.1).expect("grid");
    for (name, exec) in STRATEGIES {
        let mut cfg = SweepConfig::new(-1, 0.1, grid.clone());
        cfg.execution = exec;
        group.bench_with_input(BenchmarkId::new(name, grid.len()), &cfg, |b, cfg| {
            b.iter(|| nu_sweep(cfg).expect("sweep"))
        });
    }
    group.finish();
}

criterion_group!(benches, fuzz_batch, coupling_sweep);
criterion_main!(benches);
