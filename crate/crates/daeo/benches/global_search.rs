use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use daeo::integrator::{simulate, IntegratorConfig};
use daeo::optimizer::{find_local_optima, SearchConfig};
use daeo::problem::{DaeoProblem, Example1, Example2};

/// Certified search over the full y-domain, sequential vs. rayon
/// classification. The two modes return bit-identical results; this measures
/// what the thread pool buys (or costs) at each problem's box count.
fn bench_search(c: &mut Criterion) {
    let mut group = c.benchmark_group("find_local_optima");
    let ex1 = Example1::new();
    let ex2 = Example2::new();
    for parallel in [false, true] {
        let mode = if parallel { "parallel" } else { "sequential" };
        let cfg = SearchConfig { parallel, ..SearchConfig::default() };
        group.bench_with_input(BenchmarkId::new("ex1", mode), &cfg, |b, cfg| {
            let domain = ex1.y_domain();
            b.iter(|| find_local_optima(&ex1, black_box(&[0.7]), &domain, cfg).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("ex2", mode), &cfg, |b, cfg| {
            let domain = ex2.y_domain();
            b.iter(|| find_local_optima(&ex2, black_box(&[3.5]), &domain, cfg).unwrap());
        });
    }
    group.finish();
}

/// End-to-end integration including the per-step census and event location.
fn bench_simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    let ex1 = Example1::new();
    let ex2 = Example2::new();
    let cfg = IntegratorConfig::default();
    group.bench_function("ex1_dt_0.02", |b| {
        b.iter(|| simulate(&ex1, black_box(&cfg)).unwrap());
    });
    group.bench_function("ex2_dt_0.02", |b| {
        b.iter(|| simulate(&ex2, black_box(&cfg)).unwrap());
    });
    group.finish();
}

criterion_group!(benches, bench_search, bench_simulate);
criterion_main!(benches);
