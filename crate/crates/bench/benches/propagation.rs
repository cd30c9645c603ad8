use adiaphase::propagation::{evolution_operator, propagate, DEFAULT_TOL};
use adiaphase::spectral::track_eigensystem;
use adiaphase::TimeGrid;
use adiaphase_bench::pulse;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_propagation(c: &mut Criterion) {
    let model = pulse(1.0);
    let grid = TimeGrid::new(2000).unwrap();
    let eig = track_eigensystem(&model, grid, 1).unwrap();
    let psi0 = eig.right(0).clone();
    let mut group = c.benchmark_group("propagation");
    for t in [100.0, 800.0] {
        group.bench_with_input(BenchmarkId::new("state", t), &t, |b, &t| {
            b.iter(|| propagate(&model, t, &psi0, grid, DEFAULT_TOL).unwrap())
        });
    }
    group.bench_function("evolution_operator_T100", |b| {
        b.iter(|| evolution_operator(&model, 100.0, grid, DEFAULT_TOL).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_propagation);
criterion_main!(benches);
