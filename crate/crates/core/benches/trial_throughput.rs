//! Trial throughput: the rayon batch runner against the sequential loop on
//! the same scenario, at batch sizes where parallelism should and should
//! not pay off. Run with `cargo bench -p escape-core`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use escape_core::harness::{run_experiment, run_experiment_sequential, suites, Scenario};
use escape_core::protocol::Variant;

fn crash_batch(trials: u32) -> Scenario {
    suites::leader_crash(Variant::Escape, 16, trials, suites::CRASH_SUITE_SEED)
}

fn lossy_batch(trials: u32) -> Scenario {
    suites::loss_cell(Variant::Escape, 10, 0.3, trials, suites::LOSS_SUITE_SEED)
}

fn bench_runners(c: &mut Criterion) {
    for (family, build) in [
        ("crash-n16", crash_batch as fn(u32) -> Scenario),
        ("lossy-n10", lossy_batch),
    ] {
        let mut group = c.benchmark_group(family);
        for trials in [4u32, 64] {
            let sc = build(trials);
            group.throughput(Throughput::Elements(trials as u64));
            group.bench_with_input(BenchmarkId::new("parallel", trials), &sc, |b, sc| {
                b.iter(|| run_experiment(sc).unwrap())
            });
            group.bench_with_input(BenchmarkId::new("sequential", trials), &sc, |b, sc| {
                b.iter(|| run_experiment_sequential(sc).unwrap())
            });
        }
        group.finish();
    }
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_runners
}
criterion_main!(benches);
