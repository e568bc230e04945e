use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use imfuse_bench::triangles;
use imfuse_core::{
    alpha_cut, cdf_mean, cdf_min, cdf_product, fuse, fuse_with, mc_calibrator, necessity, Calibrator,
    CalibratorChoice, Claim, FusionRule,
};

fn closed_forms(c: &mut Criterion) {
    let xs: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
    let mut group = c.benchmark_group("closed_form_cdf");
    for k in [2, 5, 10, 25] {
        group.bench_with_input(BenchmarkId::new("min", k), &k, |b, &k| {
            b.iter(|| xs.iter().map(|&x| cdf_min(black_box(x), k).unwrap()).sum::<f64>())
        });
        group.bench_with_input(BenchmarkId::new("product", k), &k, |b, &k| {
            b.iter(|| xs.iter().map(|&x| cdf_product(black_box(x), k).unwrap()).sum::<f64>())
        });
        group.bench_with_input(BenchmarkId::new("mean", k), &k, |b, &k| {
            b.iter(|| xs.iter().map(|&x| cdf_mean(black_box(x), k).unwrap()).sum::<f64>())
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("mc_calibrator");
    group.sample_size(10);
    for samples in [100_000, 1_000_000] {
        group.bench_with_input(BenchmarkId::new("mean_k5", samples), &samples, |b, &m| {
            b.iter(|| mc_calibrator(&FusionRule::Mean, 5, m, 0).unwrap())
        });
    }
    group.finish();
}

fn fusion(c: &mut Criterion) {
    let mut group = c.benchmark_group("fuse_1001");
    for k in [2, 5] {
        let (grid, contours) = triangles(k, 1001);
        for rule in [FusionRule::Min, FusionRule::Product, FusionRule::Mean] {
            let cal = Calibrator::closed_form(&rule, k).unwrap();
            group.bench_function(BenchmarkId::new(rule.name(), k), |b| {
                b.iter(|| fuse_with(&rule, &cal, black_box(&contours), Some(&grid), true).unwrap())
            });
        }
    }
    group.finish();
}

fn measures(c: &mut Criterion) {
    let (_, contours) = triangles(3, 1001);
    let (out, _) = fuse(&FusionRule::Product, CalibratorChoice::Closed, &contours, None, true, 0).unwrap();
    let contour = out.contour.unwrap();
    let claim = Claim::interval(-0.5, 0.5).unwrap();
    c.bench_function("alpha_cut", |b| b.iter(|| alpha_cut(&contour, black_box(0.05)).unwrap()));
    c.bench_function("necessity", |b| b.iter(|| necessity(&contour, black_box(&claim)).unwrap()));
}

criterion_group!(benches, closed_forms, monte_carlo, fusion, measures);
criterion_main!(benches);
