//! Scenario builders shared by the integration and acceptance tests.

#![allow(dead_code)]

use btfem::assembly::{DiffusionTensor, LayoutMode, Media, DEFAULT_T2};
use btfem::mesh::{build_structured_mesh, phase_from_marker};
use btfem::oracle::{FdConfig, FdInterface};
use btfem::periodic::build_weak_periodic;
use btfem::stepper::{compute_signal, BoundaryCondition, Formulation, SignalRecord, Simulation, StepperConfig};
use btfem::{CompartmentMarker, Complex64, GradientSpec, Mesh, TemporalProfile};

pub const D: f64 = 3e-3;
/// 1e-5 m/s in µm/µs.
pub const KAPPA: f64 = 1e-5;

/// PGSE with δ = 10600 µs and Δ = 43100 µs.
pub fn standard_pgse() -> TemporalProfile {
    TemporalProfile::pgse(10600.0, 43100.0).unwrap()
}

/// Marker 0 for cells left of `split` along x, 1 otherwise.
pub fn split_marker(mesh: &Mesh, split: f64) -> CompartmentMarker {
    let values = (0..mesh.n_cells()).map(|c| u32::from(mesh.cell_centroid(c)[0] > split)).collect();
    CompartmentMarker::for_mesh(mesh, values).unwrap()
}

/// Interval `[0, 10]` split at 5 into two compartments with permeability
/// [`KAPPA`], Neumann ends, PGSE along x.
pub fn two_compartment_sim(cells: usize, theta: f64, dt: f64, t2: f64) -> Simulation {
    let mesh = build_structured_mesh(&[0.0], &[10.0], &[cells]).unwrap();
    let marker = split_marker(&mesh, 5.0);
    let media = Media::uniform(mesh.n_cells(), DiffusionTensor::Isotropic(D), t2).unwrap();
    let phase = phase_from_marker(&marker);
    Simulation::new(mesh, media, standard_pgse())
        .unwrap()
        .with_phase(phase, KAPPA)
        .unwrap()
        .with_config(StepperConfig { theta, dt, ..Default::default() })
}

pub fn two_compartment_interval(cells: usize, theta: f64, dt: f64, b: f64, t2: f64) -> SignalRecord {
    two_compartment_sim(cells, theta, dt, t2).run_b_values([1.0, 0.0, 0.0], &[b]).unwrap()[0]
}

/// Finite-difference counterpart of [`two_compartment_interval`], resolved
/// well beyond the finite-element discretization.
pub fn fd_two_compartment(b: f64, t2: f64) -> FdConfig {
    let profile = standard_pgse();
    let gradient = GradientSpec::from_b(&profile, [1.0, 0.0, 0.0], b).unwrap();
    let mut cfg = FdConfig::homogeneous(0.0, 10.0, 1000, 25.0, D, profile, gradient);
    cfg.interfaces = vec![FdInterface { position: 5.0, kappa: KAPPA }];
    cfg.diffusion = vec![D, D];
    cfg.t2 = vec![t2, t2];
    cfg.initial = vec![1.0, 1.0];
    cfg
}

/// Order `p` with `e_coarse / e_fine = (2^p h^p − r^p) / (h^p − r^p)` for
/// errors measured at `2h` and `h` against a reference at `r = h/4`.
pub fn reference_corrected_order(e_coarse: f64, e_fine: f64) -> f64 {
    let target = e_coarse / e_fine;
    let ratio = |p: f64| (8f64.powf(p) - 1.0) / (4f64.powf(p) - 1.0);
    let (mut lo, mut hi) = (0.05, 6.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Attenuations `(weak, strong)` on the square `[−5, 5]²` with the second
/// validation PGSE (δ = 10000 µs, Δ = 13000 µs) along (1, 1)/√2.
pub fn weak_vs_strong_square(n: usize, dt_weak: f64, dt_strong: f64, b: f64) -> (f64, f64) {
    let mesh = build_structured_mesh(&[-5.0, -5.0], &[5.0, 5.0], &[n, n]).unwrap();
    let media = Media::uniform(mesh.n_cells(), DiffusionTensor::Isotropic(D), DEFAULT_T2).unwrap();
    let profile = TemporalProfile::pgse(10000.0, 13000.0).unwrap();
    let dir = [1.0, 1.0, 0.0];
    let base = Simulation::new(mesh, media, profile).unwrap();
    let weak = base
        .clone()
        .with_boundary(BoundaryCondition::PeriodicWeak)
        .with_config(StepperConfig { dt: dt_weak, ..Default::default() })
        .run_b_values(dir, &[b])
        .unwrap()[0]
        .attenuation;
    let strong = base
        .with_boundary(BoundaryCondition::PeriodicStrong)
        .with_config(StepperConfig { dt: dt_strong, ..Default::default() })
        .run_b_values(dir, &[b])
        .unwrap()[0]
        .attenuation;
    (weak, strong)
}

/// Small branched tree of straight segments in 3D.
pub fn branched_graph() -> (Vec<[f64; 3]>, Vec<(usize, usize)>) {
    let nodes = vec![
        [0.0, 0.0, 0.0],
        [60.0, 0.0, 0.0],
        [100.0, 30.0, 0.0],
        [100.0, -20.0, 15.0],
        [130.0, 50.0, 10.0],
        [125.0, 20.0, -20.0],
    ];
    let edges = vec![(0, 1), (1, 2), (1, 3), (2, 4), (2, 5)];
    (nodes, edges)
}

/// Largest relative change of `S(t)` over 1000 steps without gradient and
/// relaxation, with a permeable interface and Neumann ends.
pub fn mass_drift_per_1000_steps() -> f64 {
    let mesh = build_structured_mesh(&[0.0, 0.0], &[10.0, 4.0], &[20, 8]).unwrap();
    let marker = split_marker(&mesh, 5.0);
    let media = Media::uniform(mesh.n_cells(), DiffusionTensor::Isotropic(D), DEFAULT_T2).unwrap();
    let initial = marker.values().iter().map(|&m| if m == 0 { 1.0 } else { 0.25 }).collect();
    let sim = Simulation::new(mesh, media, TemporalProfile::pgse(1000.0, 9000.0).unwrap())
        .unwrap()
        .with_phase(phase_from_marker(&marker), KAPPA)
        .unwrap()
        .with_initial(initial)
        .unwrap()
        .with_config(StepperConfig { dt: 10.0, ..Default::default() });
    let sys = sim.system([1.0, 0.0, 0.0]).unwrap();
    let (ops, pc) = sim.operators(&sys).unwrap();
    let s0 = sim.initial_signal(&sys);
    let mut worst = 0.0_f64;
    let mut steps = 0;
    sim.run_one_with(&sys, &ops, pc.as_ref(), 0.0, |state, _| {
        steps = state.step;
        worst = worst.max((compute_signal(&sys.mass, &state.values) - s0).norm() / s0.norm());
    })
    .unwrap();
    assert_eq!(steps, 1000);
    worst
}

/// Relative gap between the two-field κ = 0 signal and the sum of the two
/// separate single-compartment signals.
pub fn kappa_zero_decoupling_gap() -> f64 {
    let mesh = build_structured_mesh(&[0.0, 0.0], &[10.0, 4.0], &[20, 8]).unwrap();
    let marker = split_marker(&mesh, 5.0);
    let diff = |m: u32| if m == 0 { D } else { 1e-3 };
    let media = Media::from_marker(&marker, |m| Some((DiffusionTensor::Isotropic(diff(m)), DEFAULT_T2))).unwrap();
    let initial: Vec<f64> = marker.values().iter().map(|&m| if m == 0 { 1.0 } else { 0.5 }).collect();
    let profile = standard_pgse();
    let dir = [1.0, 1.0, 0.0];
    let g = GradientSpec::from_b(&profile, dir, 2000.0).unwrap();
    let cfg = StepperConfig { dt: 200.0, ..Default::default() };
    let whole = Simulation::new(mesh.clone(), media, profile.clone())
        .unwrap()
        .with_phase(phase_from_marker(&marker), 0.0)
        .unwrap()
        .with_initial(initial)
        .unwrap()
        .with_config(cfg)
        .run(&[g])
        .unwrap()[0]
        .signal;
    assert_eq!(
        Simulation::new(
            mesh.clone(),
            Media::uniform(mesh.n_cells(), DiffusionTensor::Isotropic(D), DEFAULT_T2).unwrap(),
            profile.clone()
        )
        .unwrap()
        .with_phase(phase_from_marker(&marker), 0.0)
        .unwrap()
        .layout,
        LayoutMode::Pufem
    );
    let mut parts = Complex64::new(0.0, 0.0);
    for m in [0u32, 1] {
        let cells: Vec<usize> = (0..mesh.n_cells()).filter(|&c| marker.values()[c] == m).collect();
        let (sub, _) = mesh.submesh(&cells).unwrap();
        let media = Media::uniform(sub.n_cells(), DiffusionTensor::Isotropic(diff(m)), DEFAULT_T2).unwrap();
        let ic = if m == 0 { 1.0 } else { 0.5 };
        let n = sub.n_cells();
        parts += Simulation::new(sub, media, profile.clone())
            .unwrap()
            .with_initial(vec![ic; n])
            .unwrap()
            .with_config(cfg)
            .run(&[g])
            .unwrap()[0]
            .signal;
    }
    (whole - parts).norm() / parts.norm()
}

/// Largest `|(I v)_i|` for a two-field vector whose fields agree at every
/// shared vertex.
pub fn interface_on_equal_fields() -> f64 {
    let sim = two_compartment_sim(40, 0.5, 100.0, DEFAULT_T2);
    let sys = sim.system([1.0, 0.0, 0.0]).unwrap();
    let v: Vec<Complex64> = (0..sys.n_dofs())
        .map(|d| {
            let x = sim.mesh.vertex(sys.layout.dof_vertex(d))[0];
            Complex64::new(1.0 + x * x, -x)
        })
        .collect();
    sys.jump_penalty.mul_vec(&v).iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Largest relative `|A − Aᵀ|` over every step of short smoke runs of the
/// untransformed formulation (two fields, weak periodic box).
pub fn step_matrix_symmetry_defect() -> f64 {
    let mut worst = 0.0_f64;
    let sim = two_compartment_sim(40, 0.5, 500.0, 50_000.0);
    let mesh = build_structured_mesh(&[0.0, 0.0], &[4.0, 4.0], &[8, 8]).unwrap();
    let media = Media::uniform(mesh.n_cells(), DiffusionTensor::Isotropic(D), DEFAULT_T2).unwrap();
    let weak = Simulation::new(mesh, media, TemporalProfile::pgse(2000.0, 5000.0).unwrap())
        .unwrap()
        .with_boundary(BoundaryCondition::PeriodicWeak)
        .with_config(StepperConfig { dt: 250.0, ..Default::default() });
    for s in [sim, weak] {
        assert_eq!(s.formulation, Formulation::Untransformed);
        let sys = s.system([1.0, 1.0, 0.0]).unwrap();
        let (ops, pc) = s.operators(&sys).unwrap();
        let g = GradientSpec::from_b(&s.profile, [1.0, 1.0, 0.0], 3000.0).unwrap().g;
        s.run_one_with(&sys, &ops, pc.as_ref(), g, |_, a| {
            worst = worst.max(a.symmetry_defect() / a.max_abs());
        })
        .unwrap();
    }
    worst
}

/// Largest `|θ_ms + θ_sm|` over the faces of a weakly periodic box.
pub fn phase_antisymmetry_defect() -> f64 {
    let mesh = build_structured_mesh(&[0.0; 3], &[2.0, 3.0, 4.0], &[2, 2, 2]).unwrap();
    let geo = mesh.geometry().unwrap();
    let media = Media::uniform(mesh.n_cells(), DiffusionTensor::Isotropic(D), DEFAULT_T2).unwrap();
    let layout = btfem::DofLayout::single(&mesh);
    let data = build_weak_periodic(&mesh, &geo, &layout, &media, &[0, 1, 2], mesh.default_periodic_tol()).unwrap();
    let mut worst = 0.0_f64;
    for face in &data.faces {
        for (g, f) in [([1e-5, 2e-5, -3e-6], 1234.5), ([0.0, 7e-6, 1e-6], -77.0)] {
            let (a, b) = face.phase_angles(&g, f);
            worst = worst.max((a + b).abs());
        }
    }
    worst
}
