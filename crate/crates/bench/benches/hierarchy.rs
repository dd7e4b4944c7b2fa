use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use freejump::{evolve_rk4, exact_propagate, ConvolutionBackend, Generator};
use freejump_bench::{bump_state, unit_box};

fn generator_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("generator_apply");
    for (d, m, order) in [(1, 64, 2), (1, 64, 3), (2, 16, 2)] {
        let (grid, kernel) = unit_box(d, m);
        let state = bump_state(grid, 0.5, order);
        for backend in [ConvolutionBackend::Spectral, ConvolutionBackend::Direct] {
            let mut gen = Generator::with_backend(&kernel, backend);
            let mut out = state.family().clone();
            let id = BenchmarkId::new(format!("{backend:?}"), format!("d{d}_m{m}_n{order}"));
            group.bench_function(id, |b| b.iter(|| gen.apply_into(state.family(), &mut out).unwrap()));
        }
    }
    group.finish();
}

fn rk4(c: &mut Criterion) {
    let mut group = c.benchmark_group("rk4");
    group.sample_size(10);
    for order in [2, 3] {
        let (grid, kernel) = unit_box(1, 64);
        let state = bump_state(grid, 0.5, order);
        group.bench_function(format!("100_steps_n{order}"), |b| {
            b.iter(|| evolve_rk4(&state, &kernel, 0.1, 1e-3).unwrap())
        });
    }
    group.finish();
}

fn exact(c: &mut Criterion) {
    let (grid, kernel) = unit_box(1, 64);
    let state = bump_state(grid, 0.5, 3);
    c.bench_function("exact_propagate_n3", |b| b.iter(|| exact_propagate(&state, &kernel, 1.0).unwrap()));
}

criterion_group!(benches, generator_apply, rk4, exact);
criterion_main!(benches);
