//! Sequential against data-parallel execution of the main workloads.
//!
//! With `--no-default-features` both variants run sequentially, which gives
//! the baseline for the rayon build.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kstar_core::fairness::fairness;
use kstar_core::selection::solve_kstar_with;
use kstar_core::{ergodic_rate, Exec, Policy, SelectionRule, SystemConfig};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn monte_carlo(c: &mut Criterion) {
    let cfg = SystemConfig::default();
    let mut group = c.benchmark_group("ergodic_rate");
    group.sample_size(10);
    for (name, exec) in MODES {
        for k in [8usize, 16] {
            group.bench_with_input(BenchmarkId::new(name, k), &k, |b, &k| {
                b.iter(|| ergodic_rate(black_box(&cfg), Policy::Random(k), 500, exec).unwrap())
            });
        }
    }
    group.finish();

    let noisy = SystemConfig { est_error: 0.1, ..cfg.clone() };
    let mut group = c.benchmark_group("fairness");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| fairness(black_box(&noisy), Policy::Random(16), 16, 20, exec).unwrap())
        });
    }
    group.finish();
}

fn analysis(c: &mut Criterion) {
    let cfg = SystemConfig { corr_coef: 0.5, est_error: 0.1, ..SystemConfig::default() };
    let mut group = c.benchmark_group("solve_kstar");
    for (name, exec) in MODES {
        for rule in [SelectionRule::Random, SelectionRule::Nearest] {
            group.bench_with_input(BenchmarkId::new(name, rule.name()), &rule, |b, &rule| {
                b.iter(|| solve_kstar_with(black_box(&cfg), rule, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, analysis);
criterion_main!(benches);
