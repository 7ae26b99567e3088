use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kylelab_core::bridges::{sample_bridge_sde, BridgeSpec};
use kylelab_core::equilibrium::simulate_static_equilibrium;
use kylelab_core::filtering::{particle_filter, KalmanBucyModel, ParticleFilterConfig, ScalarDiffusion};
use kylelab_core::static_kyle::{simulate_static_round, solve_static_equilibrium, StaticMarket};
use kylelab_core::{Market, MarketConfig, PriceTable, PricingRule, RngStream, TerminalValuation, TimeGrid};

fn quadrature_h(c: &mut Criterion) {
    let mut g = c.benchmark_group("pricing_h");
    for order in [32, 64, 128] {
        let rule = PricingRule::with_order(TerminalValuation::phi(), order).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(order), &rule, |b, rule| {
            b.iter(|| rule.h(black_box(0.4), black_box(0.7)))
        });
    }
    g.finish();
}

fn price_table(c: &mut Criterion) {
    let rule = PricingRule::new(TerminalValuation::phi()).unwrap();
    let grid = TimeGrid::new(200).unwrap();
    let table = PriceTable::build(&rule, grid);
    let mut g = c.benchmark_group("price_table");
    g.sample_size(10);
    g.bench_function("build_200", |b| b.iter(|| PriceTable::build(&rule, black_box(grid))));
    g.bench_function("lookup", |b| b.iter(|| table.h(black_box(123), black_box(0.37))));
    g.finish();
}

fn bridge_ensemble(c: &mut Criterion) {
    let spec = BridgeSpec::from_to(0.0, 1.0).unwrap();
    let grid = TimeGrid::new(1000).unwrap();
    let root = RngStream::new(1, 0);
    let mut g = c.benchmark_group("bridge_sde");
    g.throughput(Throughput::Elements(100));
    g.bench_function("100_paths_1000_steps", |b| {
        b.iter(|| {
            (0..100)
                .map(|i| sample_bridge_sde(&spec, grid, &root.child(i)).terminal())
                .sum::<f64>()
        })
    });
    g.finish();

    let rule = PricingRule::new(TerminalValuation::phi()).unwrap();
    let market = Market::new(&rule, 500).unwrap();
    let config = MarketConfig {
        n_steps: 500,
        n_paths: 200,
        seed: 2,
        ..Default::default()
    };
    c.bench_function("equilibrium/200_paths_500_steps", |b| {
        b.iter(|| simulate_static_equilibrium(&market, black_box(&config)).unwrap())
    });
}

fn static_rounds(c: &mut Criterion) {
    let market = StaticMarket::new(0.0, 1.0, 1.0).unwrap();
    let eq = solve_static_equilibrium(&market);
    let stream = RngStream::new(3, 0);
    let mut g = c.benchmark_group("static_rounds");
    g.throughput(Throughput::Elements(100_000));
    g.bench_function("100k", |b| {
        b.iter(|| simulate_static_round(&market, &eq, &stream, black_box(100_000)).unwrap())
    });
    g.finish();
}

fn particle(c: &mut Criterion) {
    let model = KalmanBucyModel::new(-1.0, 1.0, 0.0, 1.0).unwrap();
    let grid = TimeGrid::new(200).unwrap();
    let (_, y) = model.simulate(grid, &RngStream::new(4, 0));
    let diffusion = ScalarDiffusion::from(model);
    let mut g = c.benchmark_group("particle_filter");
    g.sample_size(10);
    for n in [1_000, 10_000] {
        let config = ParticleFilterConfig {
            n_particles: n,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::new("200_steps", n), &config, |b, config| {
            b.iter(|| particle_filter(&diffusion, config, &RngStream::new(5, 0), &y).unwrap())
        });
    }
    g.finish();
}

criterion_group!(
    benches,
    quadrature_h,
    price_table,
    bridge_ensemble,
    static_rounds,
    particle
);
criterion_main!(benches);
