mod common;

use btfem::assembly::Domain;
use btfem::assembly::{DiffusionTensor, LayoutMode, Media, DEFAULT_T2};
use btfem::mesh::{build_graph_mesh, build_layered_disk, build_structured_mesh, phase_from_marker};
use btfem::{Complex64, CsrMatrix, FemSystem, Mesh, PhaseFunction};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn ones(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0); n]
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().fold(0.0, |m, z| m.max(z.norm()))
}

fn perturbed_box(n: [usize; 3], seed: u64, extent: f64) -> Mesh {
    let m = build_structured_mesh(&[0.0; 3], &[extent; 3], &n).unwrap();
    let h = extent / *n.iter().max().unwrap() as f64;
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let verts: Vec<[f64; 3]> = m
        .vertices()
        .iter()
        .map(|v| {
            let interior = v.iter().all(|&x| x > 1e-9 && x < extent - 1e-9);
            if !interior {
                return *v;
            }
            let r: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.1..0.1) * h);
            [v[0] + r[0], v[1] + r[1], v[2] + r[2]]
        })
        .collect();
    Mesh::new(3, 3, verts, m.cells_flat().to_vec()).unwrap()
}

fn system(mesh: &Mesh, phase: &PhaseFunction, media: &Media, kappa: f64, q: [f64; 3], mode: LayoutMode) -> FemSystem {
    let geo = mesh.geometry().unwrap();
    let domain = Domain { mesh, geometry: &geo, phase, media };
    FemSystem::assemble(&domain, kappa, q, mode, true).unwrap()
}

fn anisotropic(a: f64, b: f64, c: f64) -> DiffusionTensor {
    DiffusionTensor::Anisotropic([[a, 0.3 * a.min(b), 0.0], [0.3 * a.min(b), b, 0.1 * c], [0.0, 0.1 * c, c]])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn volume_matrices_symmetric_and_conservative(
        nx in 1usize..4, ny in 1usize..4, nz in 1usize..4, seed in 0u64..1000,
        a in 1e-4f64..3e-3, b in 1e-4f64..3e-3, c in 1e-4f64..3e-3,
        qx in -1.0f64..1.0, qy in -1.0f64..1.0,
    ) {
        let mesh = perturbed_box([nx, ny, nz], seed, 5.0);
        let media = Media::uniform(mesh.n_cells(), anisotropic(a, b, c), 30_000.0).unwrap();
        let phase = PhaseFunction::uniform(mesh.n_cells());
        let sys = system(&mesh, &phase, &media, 0.0, [qx, qy, 0.5], LayoutMode::Single);
        for m in [&sys.mass, &sys.stiffness, &sys.relaxation, &sys.position] {
            prop_assert!(m.is_symmetric(1e-13));
        }
        let t = sys.transformed.as_ref().unwrap();
        prop_assert!(t.quadratic.is_symmetric(1e-13));
        let n = sys.n_dofs();
        let scale = sys.stiffness.max_abs();
        prop_assert!(max_norm(&sys.stiffness.mul_vec(&ones(n))) <= 1e-12 * scale);
        prop_assert!(max_norm(&t.convection.mul_vec(&ones(n))) <= 1e-12 * t.convection.max_abs().max(1e-300));
        let total = sys.mass.bilinear(&ones(n), &ones(n)).re;
        prop_assert!((total - 125.0).abs() <= 1e-10 * 125.0);
    }

    #[test]
    fn skew_identity_on_random_vectors(seed in 0u64..1000, qx in -1.0f64..1.0) {
        // uᵀ(−C + B)v must be the negative of vᵀ(−C + B)u (skew form)
        let mesh = perturbed_box([2, 2, 2], seed, 4.0);
        let media = Media::uniform(mesh.n_cells(), anisotropic(2e-3, 1e-3, 3e-3), DEFAULT_T2).unwrap();
        let phase = PhaseFunction::uniform(mesh.n_cells());
        let sys = system(&mesh, &phase, &media, 0.0, [qx, 0.4, -0.3], LayoutMode::Single);
        let t = sys.transformed.unwrap();
        let op = CsrMatrix::linear_combination(&[(Complex64::new(-1.0, 0.0), &t.convection), (Complex64::new(1.0, 0.0), &t.boundary)]);
        let n = sys.layout.n_dofs();
        let u: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64 * 0.37 + seed as f64).sin(), 0.0)).collect();
        let v: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64 * 1.3).cos(), 0.0)).collect();
        let a = op.bilinear(&v, &u);
        let b = op.bilinear(&u, &v);
        prop_assert!((a + b).norm() <= 1e-12 * op.max_abs() * n as f64);
    }
}

#[test]
fn two_phase_constituents() {
    let (mesh, marker) = build_layered_disk(&[2.0, 3.0, 4.0], 0.5).unwrap();
    let phase = phase_from_marker(&marker);
    let media = Media::uniform(mesh.n_cells(), DiffusionTensor::Isotropic(2e-3), DEFAULT_T2).unwrap();
    let sys = system(&mesh, &phase, &media, 1e-4, [1.0, 0.0, 0.0], LayoutMode::Pufem);
    assert_eq!(sys.layout.n_fields(), 2);
    assert!(sys.jump_penalty.is_symmetric(1e-14));
    let n = sys.n_dofs();
    assert!(max_norm(&sys.jump_penalty.mul_vec(&ones(n))) <= 1e-15 * sys.jump_penalty.max_abs());
    // the interface matrix is positive semi-definite: vᵀIv ≥ 0
    let v: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), 0.0)).collect();
    assert!(sys.jump_penalty.bilinear(&v, &v).re >= -1e-15);
    // the strong-path interface terms cancel on fields that agree
    let t = sys.transformed.as_ref().unwrap();
    let k = CsrMatrix::linear_combination(&[
        (Complex64::new(-1.0, 0.0), &t.convection),
        (Complex64::new(1.0, 0.0), &t.boundary),
        (Complex64::new(-0.5, 0.0), &t.jump),
        (Complex64::new(-2.0, 0.0), &t.average),
    ]);
    let x: Vec<f64> = (0..n).map(|d| mesh.vertex(sys.layout.dof_vertex(d))[0]).collect();
    let u: Vec<Complex64> = x.iter().map(|&x| Complex64::new(1.0 + 0.1 * x, 0.0)).collect();
    let w: Vec<Complex64> = x.iter().map(|&x| Complex64::new(0.5 - 0.2 * x * x, 0.0)).collect();
    let a = k.bilinear(&w, &u);
    let b = k.bilinear(&u, &w);
    assert!((a + b).norm() <= 1e-12 * k.max_abs() * n as f64, "{a} {b}");
}

#[test]
fn manifold_total_length() {
    let (nodes, edges) = common::branched_graph();
    let mesh = build_graph_mesh(&nodes, &edges, 0.5).unwrap();
    let media = Media::uniform(mesh.n_cells(), DiffusionTensor::Isotropic(2e-3), DEFAULT_T2).unwrap();
    let phase = PhaseFunction::uniform(mesh.n_cells());
    let sys = system(&mesh, &phase, &media, 0.0, [1.0, 1.0, 0.0], LayoutMode::Single);
    let length: f64 =
        edges.iter().map(|&(a, b)| (0..3).map(|k| (nodes[a][k] - nodes[b][k]).powi(2)).sum::<f64>().sqrt()).sum();
    let n = sys.n_dofs();
    assert!((sys.mass.bilinear(&ones(n), &ones(n)).re - length).abs() < 1e-10 * length);
    assert!(max_norm(&sys.stiffness.mul_vec(&ones(n))) < 1e-14);
}
