use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use pidrag::condense::CondensationPolicy;
use pidrag::dexpi::ParseOptions;
use pidrag::pipeline::{run_parallel, run_sequential};
use pidrag::synth::{synth_dexpi, SynthParams};

fn batch(c: &mut Criterion) {
    let policy = CondensationPolicy::default();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for docs in [8usize, 32] {
        let batch: Vec<String> = (0..docs as u64).map(|s| synth_dexpi(&SynthParams::scaled(s, 3))).collect();
        group.throughput(Throughput::Elements(docs as u64));
        group.bench_with_input(BenchmarkId::new("sequential", docs), &batch, |b, batch| {
            b.iter(|| run_sequential(batch, &policy, ParseOptions::default()))
        });
        group.bench_with_input(BenchmarkId::new("parallel", docs), &batch, |b, batch| {
            b.iter(|| run_parallel(batch, &policy, ParseOptions::default()))
        });
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
