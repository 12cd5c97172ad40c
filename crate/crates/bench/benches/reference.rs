use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use sve_core::reference::{
    heston_call_fourier, heston_charfn, ou_call_price, HestonParams, RiccatiDrift,
};

fn params() -> HestonParams {
    HestonParams {
        s0: 1.0,
        v0: 0.02,
        theta: 0.02,
        lambda: 0.3,
        nu: 0.3,
        rho: -0.7,
        hurst: 0.1,
    }
}

fn ou(c: &mut Criterion) {
    c.bench_function("ou_call_price", |b| {
        b.iter(|| ou_call_price(1.0, 1.0, -0.5, 0.2, black_box(0.1), 1.0, 1.0).unwrap())
    });
}

fn heston(c: &mut Criterion) {
    let p = params();
    c.bench_function("heston_charfn_1000_steps", |b| {
        b.iter(|| heston_charfn(black_box(2.0), &p, 1.0, 1000).unwrap())
    });
    let mut group = c.benchmark_group("heston_call_fourier");
    group.sample_size(10);
    group.bench_function("200_steps", |b| {
        b.iter(|| {
            heston_call_fourier(&p, black_box(1.0), 1.0, 200, RiccatiDrift::MeanReversion).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, ou, heston);
criterion_main!(benches);
