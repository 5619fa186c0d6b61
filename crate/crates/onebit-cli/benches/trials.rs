//! Trial-batch benchmark: the same Monte-Carlo workload run sequentially
//! (workers = 1) and through the rayon pool (workers = 0), in one binary.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use onebit_cli::experiment::{run_bench, ExperimentSpec, GenGrid, GridPoint};
use onebit_cli::protocol::{ModelOverrides, SolverChoice};
use onebit_core::data::MatrixType;
use onebit_core::solver::SolverConfig;

fn spec(workers: usize) -> ExperimentSpec {
    ExperimentSpec {
        grid: GenGrid::single(GridPoint {
            m: 300,
            n: 800,
            s_star: 8,
            matrix_type: MatrixType::TypeI,
            mu: 0.3,
            noise: 0.1,
            flip: 0.05,
        }),
        model: ModelOverrides::default(),
        solver_cfg: SolverConfig::default(),
        solvers: vec![SolverChoice::Scad],
        trials: 6,
        base_seed: 1,
        workers,
    }
}

fn bench_trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| run_bench(black_box(&spec(1))).unwrap())
    });
    group.bench_function("parallel", |b| {
        b.iter(|| run_bench(black_box(&spec(0))).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_trials);
criterion_main!(benches);
