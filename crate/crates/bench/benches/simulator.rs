use criterion::{criterion_group, criterion_main, Criterion};
use freejump::{estimate_correlations, EnsembleSpec};
use freejump_bench::{bump_density, unit_box};

fn ensemble(c: &mut Criterion) {
    let (grid, kernel) = unit_box(1, 64);
    let spec = EnsembleSpec {
        replicas: 2000,
        base_seed: 1,
        initial_density: bump_density(grid, 10.0),
        kernel,
        horizon: 1.0,
    };
    let mut group = c.benchmark_group("simulator");
    group.sample_size(10);
    group.bench_function("ensemble_2000", |b| b.iter(|| spec.run().unwrap()));
    let systems = spec.run().unwrap();
    for order in [1, 2] {
        group.bench_function(format!("estimate_k{order}"), |b| {
            b.iter(|| estimate_correlations(&systems, order).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ensemble);
criterion_main!(benches);
