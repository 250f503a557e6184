use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use hindsight::{DemandProcess, OracleContext, RatePrior};

fn hindsight_mean(c: &mut Criterion) {
    let gamma =
        OracleContext::with_defaults(RatePrior::gamma(1.0, 0.5).unwrap(), DemandProcess::Poisson)
            .unwrap();
    c.bench_function("hindsight_mean/gamma_closed_form", |b| {
        b.iter(|| gamma.hindsight_mean(black_box(10)).unwrap())
    });
    c.bench_function("hindsight_mean/gamma_quadrature", |b| {
        b.iter(|| gamma.hindsight_mean_by_quadrature(black_box(10)).unwrap())
    });

    let lognormal = OracleContext::with_defaults(
        RatePrior::lognormal(0.5, 1.0).unwrap(),
        DemandProcess::negative_binomial(2.0).unwrap(),
    )
    .unwrap();
    c.bench_function("hindsight_mean/lognormal_negbin", |b| {
        b.iter(|| lognormal.hindsight_mean(black_box(10)).unwrap())
    });
    c.bench_function("hindsight_curve/gamma_quadrature_0_50", |b| {
        b.iter(|| {
            (0..=50u64)
                .map(|s| gamma.hindsight_mean_by_quadrature(s).unwrap())
                .sum::<f64>()
        })
    });
}

criterion_group!(benches, hindsight_mean);
criterion_main!(benches);
