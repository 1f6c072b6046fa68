use breathid_bench::gaussian_library;
use breathid_core::auth::{decide_identity, fuse, identify, Block, FusionWeights, DEFAULT_ALPHA, DEFAULT_IDENTIFY_ETA};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench(c: &mut Criterion) {
    let weights = FusionWeights::default();
    let mut group = c.benchmark_group("identify");
    for n_users in [10, 20, 30] {
        let (library, tests) = gaussian_library(n_users, 5);
        group.bench_with_input(BenchmarkId::from_parameter(library.n_models()), &tests[0], |b, rows| {
            b.iter(|| {
                let ht = identify(rows, &library, Block::Ht { alpha: DEFAULT_ALPHA }).unwrap();
                let ml = identify(rows, &library, Block::Ml).unwrap();
                decide_identity(&fuse(&[ht, ml], &weights).unwrap(), DEFAULT_IDENTIFY_ETA, None)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
