use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use pairgrid::{BatchHeap, HeapifyMode};
use pairgrid_bench::{heap_entries, key_changes};

const N: usize = 100_000;

fn update_keys(c: &mut Criterion) {
    let mut g = c.benchmark_group("heap_update_keys");
    for mode in [HeapifyMode::Sync, HeapifyMode::Async] {
        let entries = heap_entries(N, 1);
        for m in [16, 256, 4096] {
            let changes = key_changes(N, m, 2);
            g.bench_function(BenchmarkId::new(format!("{mode:?}"), m), |b| {
                b.iter_batched(
                    || BatchHeap::build_with_mode(entries.clone(), mode).unwrap(),
                    |mut h| h.update_keys(&changes).unwrap(),
                    BatchSize::LargeInput,
                )
            });
        }
    }
    g.finish();
}

fn build(c: &mut Criterion) {
    let entries = heap_entries(N, 3);
    c.bench_function("heap_build", |b| {
        b.iter_batched(|| entries.clone(), |e| BatchHeap::build(e).unwrap(), BatchSize::LargeInput)
    });
}

criterion_group!(benches, update_keys, build);
criterion_main!(benches);
