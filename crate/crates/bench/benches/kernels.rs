use calderon_bench::{atom, bump};
use calderon_core::exponents::{luxemburg_norm, DEFAULT_NORM_TOL};
use calderon_core::maximal::{n_maximal, NOptions};
use calderon_core::potential::potential;
use calderon_core::{ExponentFunction, FunctionClass, KernelSpec, MaximalParams, ScaleGrid};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_norm(c: &mut Criterion) {
    let mut group = c.benchmark_group("luxemburg_norm");
    let p = ExponentFunction::asymptotic(0.8, 0.4).unwrap();
    for (n, points) in [(1, 4096), (2, 256)] {
        let f = bump(n, 4.0, points);
        group.bench_with_input(BenchmarkId::new(format!("{n}d"), points), &f, |b, f| {
            b.iter(|| luxemburg_norm(black_box(f), &p, DEFAULT_NORM_TOL).unwrap())
        });
    }
    group.finish();
}

fn bench_n_maximal(c: &mut Criterion) {
    let mut group = c.benchmark_group("n_maximal");
    group.sample_size(20);
    let scales = ScaleGrid::geometric(0.0625, 2.0).unwrap();
    for (q, gamma) in [(2.0, 2.0), (8.0, 2.0), (2.0, 4.0)] {
        let prm = MaximalParams::new(q, gamma, scales.clone()).unwrap();
        let class = FunctionClass::new(bump(1, 4.0, 1024), prm.k);
        let opts = NOptions { restarts: 4, ..NOptions::default() };
        group.bench_function(format!("q{q}_gamma{gamma}"), |b| {
            b.iter(|| n_maximal(&class, &prm, black_box(&[0.3]), &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_potential(c: &mut Criterion) {
    let mut group = c.benchmark_group("potential");
    group.sample_size(10);
    for (n, points, m) in [(1, 4096, 1), (1, 4096, 2), (2, 256, 1)] {
        let a = atom(n, points, m);
        let spec = KernelSpec::new(m, n).unwrap();
        group.bench_function(format!("{n}d_{points}_m{m}"), |b| b.iter(|| potential(black_box(&a), &spec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_norm, bench_n_maximal, bench_potential);
criterion_main!(benches);
