use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use tvdispatch_bench::synthetic;
use tvdispatch_core::{run, solve_horizon, InitPolicy, OracleOptions};

fn engine_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine_run");
    for &nodes in &[5usize, 20] {
        let fx = synthetic(nodes, 3, 500);
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &fx, |b, fx| {
            b.iter(|| {
                run(
                    black_box(&fx.problems),
                    &fx.graph,
                    &fx.schedule,
                    0,
                    InitPolicy::default(),
                    500,
                    fx.meta.clone(),
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn oracle_horizon(c: &mut Criterion) {
    let fx = synthetic(5, 3, 200);
    let opts = OracleOptions::default();
    c.bench_function("oracle_horizon_200", |b| {
        b.iter(|| solve_horizon(black_box(&fx.problems), 200, &opts).unwrap())
    });
}

criterion_group!(benches, engine_run, oracle_horizon);
criterion_main!(benches);
