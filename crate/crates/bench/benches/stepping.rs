use std::hint::black_box;

use btfem_bench::{layered_disk, periodic_cube};
use criterion::{criterion_group, criterion_main, Criterion};

fn periodic_cube_signal(c: &mut Criterion) {
    let sim = periodic_cube(6, 200.0);
    c.bench_function("periodic_cube_n6_b2000", |b| {
        b.iter(|| sim.run_b_values([0.0, 1.0, 0.0], black_box(&[2000.0])).unwrap())
    });
}

fn layered_disk_signal(c: &mut Criterion) {
    let sim = layered_disk(0.5, 200.0);
    let mut group = c.benchmark_group("layered_disk");
    group.sample_size(10);
    group.bench_function("b1000", |b| b.iter(|| sim.run_b_values([1.0, 0.0, 0.0], black_box(&[1000.0])).unwrap()));
    group.finish();
}

criterion_group!(benches, periodic_cube_signal, layered_disk_signal);
criterion_main!(benches);
