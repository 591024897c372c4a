use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vpon_bench::loaded;
use vpon_core::Scenario;

fn loaded_runs(c: &mut Criterion) {
    let mut g = c.benchmark_group("loaded_run_50ms");
    g.sample_size(20);
    for s in Scenario::ALL {
        let cfg = loaded(s, 10.0, 0.05);
        g.bench_with_input(BenchmarkId::from_parameter(s), &cfg, |b, cfg| {
            b.iter(|| vpon_core::run(cfg).expect("run"))
        });
    }
    g.finish();
}

fn idle_run(c: &mut Criterion) {
    let mut cfg = loaded(Scenario::Cooperative, 1.0, 0.2);
    cfg.load.total_load = 0.0;
    cfg.pon.onu_count = 1;
    c.bench_function("idle_run_200ms", |b| b.iter(|| vpon_core::run(&cfg).expect("run")));
}

criterion_group!(benches, loaded_runs, idle_run);
criterion_main!(benches);
