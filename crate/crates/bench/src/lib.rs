//! Benchmark fixtures.

use btfem::assembly::DEFAULT_T2;
use btfem::mesh::{build_layered_disk, build_structured_mesh, phase_from_marker};
use btfem::{BoundaryCondition, DiffusionTensor, Media, Mesh, Simulation, StepperConfig, TemporalProfile};

pub const D: f64 = 3e-3;

pub fn pgse() -> TemporalProfile {
    TemporalProfile::pgse(10600.0, 43100.0).unwrap()
}

pub fn cube(n: usize) -> Mesh {
    build_structured_mesh(&[0.0; 3], &[10.0; 3], &[n; 3]).unwrap()
}

pub fn uniform_media(mesh: &Mesh) -> Media {
    Media::uniform(mesh.n_cells(), DiffusionTensor::Isotropic(D), DEFAULT_T2).unwrap()
}

/// Homogeneous periodic cube.
pub fn periodic_cube(n: usize, dt: f64) -> Simulation {
    let mesh = cube(n);
    let media = uniform_media(&mesh);
    Simulation::new(mesh, media, pgse())
        .unwrap()
        .with_boundary(BoundaryCondition::PeriodicStrong)
        .with_config(StepperConfig { dt, ..Default::default() })
}

/// Three-layer disk with permeable interfaces.
pub fn layered_disk(h: f64, dt: f64) -> Simulation {
    let (mesh, marker) = build_layered_disk(&[5.0, 7.5, 10.0], h).unwrap();
    let media = uniform_media(&mesh);
    Simulation::new(mesh, media, pgse())
        .unwrap()
        .with_phase(phase_from_marker(&marker), 1e-5)
        .unwrap()
        .with_config(StepperConfig { dt, ..Default::default() })
}
