use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use twistlab::{
    apply_rotation, echo_with_dephasing, make_css, numeric_slope, optimal_twisting, optimize_cavity, qcrb_curve,
    wigner_grid, wigner_small_d, Axis, Detuning, QcrbAxis,
};

fn rotations(c: &mut Criterion) {
    let mut g = c.benchmark_group("small_d");
    for n in [100usize, 1000] {
        g.bench_with_input(BenchmarkId::new("full_angle", n), &n, |b, &n| {
            b.iter(|| wigner_small_d(n, black_box(1.2)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("small_angle", n), &n, |b, &n| {
            b.iter(|| wigner_small_d(n, black_box(1e-6)).unwrap())
        });
    }
    g.finish();

    let css = make_css(1000).unwrap();
    c.bench_function("rotate_y_1000", |b| b.iter(|| apply_rotation(&css, Axis::Y, black_box(0.3)).unwrap()));
}

fn echo(c: &mut Criterion) {
    let mut g = c.benchmark_group("echo_slope");
    for n in [100usize, 1000, 10_000] {
        let q = optimal_twisting(n).unwrap().q_opt;
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| numeric_slope(n, black_box(q)).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("dephased_echo");
    g.sample_size(10);
    for n in [50usize, 200] {
        let q = optimal_twisting(n).unwrap().q_opt;
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| echo_with_dephasing(n, q, black_box(30.0), 1e-4).unwrap())
        });
    }
    g.finish();
}

fn figures(c: &mut Criterion) {
    let q_grid: Vec<f64> = (1..=32).map(|i| i as f64).collect();
    c.bench_function("qcrb_curve_200", |b| b.iter(|| qcrb_curve(200, black_box(&q_grid), QcrbAxis::Optimal).unwrap()));
    c.bench_function("cavity_free_detuning", |b| {
        b.iter(|| optimize_cavity(black_box(100_000), 1.0, 0.5, Detuning::Free).unwrap())
    });

    let css = make_css(30).unwrap();
    let mut g = c.benchmark_group("wigner");
    g.sample_size(10);
    g.bench_function("grid_30_91x180", |b| b.iter(|| wigner_grid(&css, 91, 180).unwrap()));
    g.finish();
}

criterion_group!(benches, rotations, echo, figures);
criterion_main!(benches);
