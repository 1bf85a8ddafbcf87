use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ucpd::compact::solve_compact_relaxation;
use ucpd::{build_compact, cg_solve, price_unit_dp, CgConfig};
use ucpd_bench::{duals, instance};

fn pricing(c: &mut Criterion) {
    let mut g = c.benchmark_group("dp_pricing");
    for horizon in [24, 48, 96] {
        let inst = instance(1, 1, horizon, 3);
        let d = duals(&inst);
        g.bench_with_input(BenchmarkId::from_parameter(horizon), &horizon, |b, &h| {
            b.iter(|| price_unit_dp(&inst.units[0], &d, h).unwrap())
        });
    }
    g.finish();
}

fn compact_lp(c: &mut Criterion) {
    let mut g = c.benchmark_group("compact_lp");
    g.sample_size(10);
    for (units, horizon) in [(5, 24), (10, 24)] {
        let inst = instance(2, units, horizon, 3);
        let model = build_compact(&inst);
        g.bench_function(format!("{units}x{horizon}"), |b| {
            b.iter(|| solve_compact_relaxation(&inst, &model).unwrap())
        });
    }
    g.finish();
}

fn column_generation(c: &mut Criterion) {
    let mut g = c.benchmark_group("column_generation");
    g.sample_size(10);
    let inst = instance(3, 6, 24, 3);
    g.bench_function("6x24", |b| b.iter(|| cg_solve(&inst, &CgConfig::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, pricing, compact_lp, column_generation);
criterion_main!(benches);
