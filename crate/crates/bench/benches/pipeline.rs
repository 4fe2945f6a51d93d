use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use curvesfm_bench::{densify_case, linearized_observations, observations, planar_views, trace_case};
use curvesfm_core::densify::reconstruct_curve;
use curvesfm_core::perspective::correspond_curve;
use curvesfm_core::{derivation_trace, linearized_solve, solve_global, SolverConfig};

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(20);
    for frames in [6, 12] {
        let obs = observations(11, frames);
        // Sequential so the numbers do not depend on the machine's core count.
        let config = SolverConfig {
            parallel: false,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::new("global", frames), &obs, |b, obs| {
            b.iter(|| solve_global(black_box(obs), &config).unwrap())
        });
    }
    let obs = linearized_observations(12);
    group.bench_function("linearized/23", |b| {
        b.iter(|| linearized_solve(black_box(&obs), &SolverConfig::default()).unwrap())
    });
    group.finish();
}

fn densify(c: &mut Criterion) {
    let mut group = c.benchmark_group("densify");
    for samples in [64, 256] {
        let case = densify_case(13, samples);
        group.bench_with_input(BenchmarkId::new("two_frames", samples), &case, |b, case| {
            b.iter(|| reconstruct_curve(black_box(&case.images), &case.poses, &case.params).unwrap())
        });
    }
    group.finish();
}

fn perspective(c: &mut Criterion) {
    let (v1, v2) = planar_views(14);
    c.bench_function("correspond_curve/64", |b| {
        b.iter(|| correspond_curve(black_box(&v1), black_box(&v2)).unwrap())
    });
}

fn derivation(c: &mut Criterion) {
    let (curve, delta, tau) = trace_case(15);
    c.bench_function("derivation_trace", |b| {
        b.iter(|| derivation_trace(black_box(&curve), delta, tau).unwrap())
    });
}

criterion_group!(benches, solvers, densify, perspective, derivation);
criterion_main!(benches);
