//! Batch-simulation throughput: data-parallel vs sequential execution.
//!
//! Both paths produce bit-identical statistics by construction, so the
//! only question is speed. Run with `cargo bench -p noma-harq-core`; to
//! measure the sequential path without rayon compiled in at all, use
//! `cargo bench -p noma-harq-core --no-default-features`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use noma_harq_core::errormodel::CodeParams;
use noma_harq_core::fading::{FadingParams, LinkConfig};
use noma_harq_core::simengine::{
    run_batch, run_batch_sequential, Adaptation, SchemePolicy, SchemeVariant,
};

fn default_config() -> LinkConfig {
    let code = CodeParams::new(1000, 1.0);
    LinkConfig::new(
        FadingParams::new(0.1, 1.0),
        1000.0,
        1000.0,
        code,
        code,
        1e-3,
        1e-3,
    )
}

fn bench_batches(c: &mut Criterion) {
    let cfg = default_config();
    let policy = SchemePolicy {
        scheme: SchemeVariant::ProposedOrderSwap,
        adaptation: Adaptation::RateAdapt,
    };
    let mut group = c.benchmark_group("run_batch");
    group.sample_size(10);
    for trials in [20_000u64, 100_000] {
        group.throughput(Throughput::Elements(trials));
        group.bench_with_input(
            BenchmarkId::new("parallel", trials),
            &trials,
            |b, &trials| b.iter(|| run_batch(&cfg, policy, trials, 42)),
        );
        group.bench_with_input(
            BenchmarkId::new("sequential", trials),
            &trials,
            |b, &trials| b.iter(|| run_batch_sequential(&cfg, policy, trials, 42)),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_batches);
criterion_main!(benches);
