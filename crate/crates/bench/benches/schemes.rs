use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use sve_core::estimators::Payoff;
use sve_core::milstein::MilsteinScheme;
use sve_core::mlmc::LevelSampler;
use sve_core::models::{rough_heston, volterra_ou};
use sve_core::noise::sample_increments;
use sve_core::{EulerScheme, TimeGrid};

fn euler(c: &mut Criterion) {
    let model = rough_heston(1.0, 0.02, 0.02, 0.3, 0.3, -0.7, 0.1).unwrap();
    let noise = model.noise(1, 0);
    let mut group = c.benchmark_group("euler_heston_path");
    for n in [40, 160, 640] {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        let scheme = EulerScheme::new(&model, &grid);
        let mut p = 0;
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                p += 1;
                scheme
                    .run(black_box(&sample_increments(&grid, &noise, p)))
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn milstein(c: &mut Criterion) {
    let model = volterra_ou(1.0, 1.0, -0.5, 0.2, 0.1).unwrap();
    let noise = model.noise(1, 0);
    let mut group = c.benchmark_group("milstein_ou_path");
    for n in [20, 80, 320] {
        let grid = TimeGrid::uniform(1.0, n).unwrap();
        let scheme = MilsteinScheme::new(&model, &grid).unwrap();
        let mut p = 0;
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                p += 1;
                scheme.sample_path(&noise, black_box(p)).unwrap()
            })
        });
    }
    group.finish();
}

fn mlmc_level(c: &mut Criterion) {
    let model = volterra_ou(1.0, 1.0, -0.5, 0.2, 0.25).unwrap();
    let call = Payoff::TerminalCall {
        strike: 1.0,
        component: 0,
    };
    let mut group = c.benchmark_group("mlmc_level_pair");
    for level in [1, 3, 5] {
        let sampler = LevelSampler::new(&model, &call, 4, level, 1.0, 1).unwrap();
        let mut p = 0;
        group.bench_with_input(BenchmarkId::from_parameter(level), &level, |b, _| {
            b.iter(|| {
                p += 1;
                sampler.sample(black_box(p)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, euler, milstein, mlmc_level);
criterion_main!(benches);
