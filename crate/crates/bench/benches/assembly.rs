use std::hint::black_box;

use btfem::assembly::Domain;
use btfem::mesh::{build_layered_disk, phase_from_marker};
use btfem::{FemSystem, LayoutMode, PhaseFunction};
use btfem_bench::{cube, uniform_media};
use criterion::{criterion_group, criterion_main, Criterion};

fn cube_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_cube");
    for n in [4, 8, 12] {
        let mesh = cube(n);
        let geo = mesh.geometry().unwrap();
        let media = uniform_media(&mesh);
        let phase = PhaseFunction::uniform(mesh.n_cells());
        let domain = Domain { mesh: &mesh, geometry: &geo, phase: &phase, media: &media };
        group.bench_function(format!("n{n}"), |b| {
            b.iter(|| FemSystem::assemble(black_box(&domain), 0.0, [1.0, 0.0, 0.0], LayoutMode::Single, true).unwrap())
        });
    }
    group.finish();
}

fn disk_assembly(c: &mut Criterion) {
    let (mesh, marker) = build_layered_disk(&[5.0, 7.5, 10.0], 0.25).unwrap();
    let geo = mesh.geometry().unwrap();
    let media = uniform_media(&mesh);
    let phase = phase_from_marker(&marker);
    let domain = Domain { mesh: &mesh, geometry: &geo, phase: &phase, media: &media };
    c.bench_function("assemble_layered_disk_pufem", |b| {
        b.iter(|| FemSystem::assemble(black_box(&domain), 1e-5, [1.0, 0.0, 0.0], LayoutMode::Pufem, true).unwrap())
    });
}

criterion_group!(benches, cube_assembly, disk_assembly);
criterion_main!(benches);
