use catstream_bench::{in_control_engine, nominal_population, ordinal_population};
use catstream_core::{RngSeed, Statistic};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn chart_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("chart_step_1000_streams");
    for (name, specs) in [
        ("nominal", nominal_population()),
        ("ordinal", ordinal_population()),
    ] {
        for statistic in Statistic::ALL {
            let engine = in_control_engine(&specs, statistic);
            let mut run = engine.start(RngSeed::new(1, 0));
            group.bench_function(BenchmarkId::new(name, statistic), |b| {
                b.iter(|| black_box(engine.step(&mut run)))
            });
        }
    }
    group.finish();
}

fn run_length(c: &mut Criterion) {
    let engine = in_control_engine(&nominal_population(), Statistic::Zhang);
    let mut rep = 0;
    c.bench_function("run_length_zhang_capped_50", |b| {
        b.iter(|| {
            rep += 1;
            black_box(engine.run_length(RngSeed::new(2, rep), f64::INFINITY, 50))
        })
    });
}

criterion_group!(benches, chart_step, run_length);
criterion_main!(benches);
