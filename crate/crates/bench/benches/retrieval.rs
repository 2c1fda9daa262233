use cascade_bench::{corpus, queries};
use cascade_core::index::Bm25Params;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn retrieve(c: &mut Criterion) {
    let (_, index) = corpus(20_000, 5_000, 1);
    let qs = queries(64, 5_000, 2);
    let mut group = c.benchmark_group("retrieve_top_k");
    group.throughput(Throughput::Elements(qs.len() as u64));
    for k0 in [10, 100, 1000] {
        group.bench_with_input(BenchmarkId::from_parameter(k0), &k0, |b, &k0| {
            b.iter(|| {
                for q in &qs {
                    std::hint::black_box(index.retrieve_top_k(q, k0, Bm25Params::default()));
                }
            })
        });
    }
    group.finish();
}

fn build(c: &mut Criterion) {
    let (store, _) = corpus(5_000, 5_000, 3);
    c.bench_function("index_build_5k", |b| {
        b.iter(|| {
            cascade_core::InvertedIndex::build(&store, Default::default(), Bm25Params::default()).unwrap()
        })
    });
}

criterion_group!(benches, retrieve, build);
criterion_main!(benches);
