use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tvgroup::selection::LambdaGrid;
use tvgroup::simulation::{gen_panel, Dgp, DgpSpec};
use tvgroup::solver::{adaptive_weights, preliminary_ols, PenalizedSystem};
use tvgroup::spline::unit_grid;
use tvgroup::{build_design, fit_lambda, select_lambda, FitConfig, SplineBasis, SplineConfig};

fn spline(c: &mut Criterion) {
    let basis = SplineBasis::new(SplineConfig::new(3, 3).unwrap()).unwrap();
    let grid = unit_grid(1000);
    c.bench_function("basis_eval_1000", |b| {
        b.iter(|| basis.eval_grid(black_box(&grid)).unwrap())
    });
}

fn design(c: &mut Criterion) {
    let tp = gen_panel(&DgpSpec::new(Dgp::TrendExogenous, 50, 50), 1).unwrap();
    let cfg = SplineConfig::new(3, 2).unwrap();
    c.bench_function("build_design_n50_t50", |b| {
        b.iter(|| build_design(black_box(&tp.panel), cfg).unwrap())
    });
}

fn admm(c: &mut Criterion) {
    let tp = gen_panel(&DgpSpec::new(Dgp::Trend, 50, 50), 1).unwrap();
    let design = build_design(&tp.panel, SplineConfig::new(3, 3).unwrap()).unwrap();
    let prelim = preliminary_ols(&design).unwrap();
    let weights = adaptive_weights(&prelim, 2.0);
    let config = FitConfig::default().with_lambda(20.0);
    let system = PenalizedSystem::new(&design, config.admm_penalty).unwrap();
    let mut group = c.benchmark_group("admm");
    group.sample_size(10);
    group.bench_function("factorize_n50", |b| {
        b.iter(|| PenalizedSystem::new(black_box(&design), 1.0).unwrap())
    });
    group.bench_function("fit_lambda_dgp1_n50_t50", |b| {
        b.iter(|| fit_lambda(&design, &system, &prelim, &weights, black_box(&config)).unwrap())
    });
    group.bench_function("select_lambda_10_points", |b| {
        let grid = LambdaGrid::linear(0.1, 50.0, 10).values();
        b.iter(|| select_lambda(&design, black_box(&grid), &config, None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, spline, design, admm);
criterion_main!(benches);
