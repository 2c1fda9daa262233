use cascade_bench::matrix;
use cascade_core::duo::{aggregate, AggregationMethod};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn aggregation(c: &mut Criterion) {
    let mut group = c.benchmark_group("aggregate");
    for n in [10, 30, 50] {
        let m = matrix(n, n as u64);
        for method in [
            AggregationMethod::Sum,
            AggregationMethod::Binary,
            AggregationMethod::Min,
            AggregationMethod::Max,
            AggregationMethod::Sample { m: n / 5, seed: 7 },
        ] {
            group.bench_with_input(BenchmarkId::new(method.name(), n), &m, |b, m| {
                b.iter(|| aggregate(m, &method).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, aggregation);
criterion_main!(benches);
