use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use logconcave::divergence::{dks_n, kl_sq, tv};
use logconcave::{fit_mle, FitOptions, NamedDensity, WeightedSample};
use logconcave_bench::draws;

fn fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_mle");
    group.sample_size(20);
    for truth in ["gaussian:0,1", "laplace:0,1"] {
        for n in [100, 1000, 6400] {
            let sample = WeightedSample::from_observations(&draws(truth, n, 1)).unwrap();
            group.bench_with_input(BenchmarkId::new(truth, n), &sample, |b, s| {
                b.iter(|| fit_mle(s, &FitOptions::default()).unwrap())
            });
        }
    }
    group.finish();
}

fn divergences(c: &mut Criterion) {
    let sample = WeightedSample::from_observations(&draws("laplace:0,1", 1000, 2)).unwrap();
    let f = fit_mle(&sample, &FitOptions::default()).unwrap().density;
    let laplace: NamedDensity = "laplace:0,1".parse().unwrap();
    let gaussian: NamedDensity = "gaussian:0,1".parse().unwrap();
    let mut group = c.benchmark_group("divergence");
    group.bench_function("tv_exact", |b| b.iter(|| tv(&f, &laplace)));
    group.bench_function("kl_exact", |b| b.iter(|| kl_sq(&f, &laplace)));
    group.bench_function("kl_quadrature", |b| b.iter(|| kl_sq(&f, &gaussian)));
    group.sample_size(10);
    group.bench_function("dks_n", |b| b.iter(|| dks_n(&f, &laplace, 1000).unwrap()));
    group.finish();
}

criterion_group!(benches, fit, divergences);
criterion_main!(benches);
