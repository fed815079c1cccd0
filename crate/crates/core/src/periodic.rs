//! Periodic outer boundaries of box domains.
//!
//! The strong variant identifies each slave dof with its translated master
//! dof (the transformed formulation is then exactly periodic). The weak
//! variant couples the two faces through an artificial permeability `κᵉ`
//! and the pseudo-periodic phase `e^{iθ}`, with the cross-face traces taken
//! from the previous step.

use num_complex::Complex64;
use thiserror::Error;

use crate::assembly::{DofLayout, Media};
use crate::mesh::geometry::{dot, norm};
use crate::mesh::pairing::face_facets;
use crate::mesh::{find_periodic_pairs, FacetPairing, GeometryTables, Mesh, MeshError};
use crate::sequences::GAMMA;
use crate::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodicError {
    #[error(transparent)]
    Pairing(#[from] MeshError),
    #[error("vertex {vertex} has no dof in field {field} at its periodic image")]
    Support { vertex: usize, field: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("axis {axis}: no facet on the opposite face contains the point {point:?}")]
    Projection { axis: usize, point: [f64; 3] },
}

/// Identification of slave dofs with master dofs on all periodic axes.
///
/// The prolongation `P` maps reduced vectors to full ones by copying each
/// representative's value to its periodic images.
#[derive(Debug, Clone)]
pub struct PeriodicConstraint {
    pairings: Vec<FacetPairing>,
    /// Reduced index of every full dof.
    reduced_index: Vec<usize>,
    /// Representative full dof of every reduced index.
    kept: Vec<usize>,
}

/// Builds the strong constraint for the given axes. Vertices on several
/// periodic faces are mapped axis by axis until a fixed point is reached,
/// so every corner class has a single representative.
pub fn build_strong_constraint(
    mesh: &Mesh,
    layout: &DofLayout,
    axes: &[usize],
    tol: f64,
) -> Result<PeriodicConstraint, PeriodicError> {
    let mut sorted_axes = axes.to_vec();
    sorted_axes.sort_unstable();
    sorted_axes.dedup();
    let pairings = sorted_axes.iter().map(|&a| find_periodic_pairs(mesh, a, tol)).collect::<Result<Vec<_>, _>>()?;
    let nv = mesh.n_vertices();
    let mut to_master = vec![vec![usize::MAX; nv]; pairings.len()];
    for (k, p) in pairings.iter().enumerate() {
        for &(m, s) in &p.vertex_pairs {
            to_master[k][s] = m;
        }
    }
    let rep: Vec<usize> = (0..nv)
        .map(|v| {
            let mut w = v;
            loop {
                let before = w;
                for map in &to_master {
                    if map[w] != usize::MAX {
                        w = map[w];
                    }
                }
                if w == before {
                    return w;
                }
            }
        })
        .collect();

    let n = layout.n_dofs();
    let mut rep_dof = Vec::with_capacity(n);
    for d in 0..n {
        let (field, v) = (layout.dof_field(d), layout.dof_vertex(d));
        let r = layout.dof(field, rep[v]).ok_or(PeriodicError::Support { vertex: v, field })?;
        rep_dof.push(r);
    }
    let mut kept: Vec<usize> = (0..n).filter(|&d| rep_dof[d] == d).collect();
    kept.sort_unstable();
    let mut position = vec![usize::MAX; n];
    for (i, &d) in kept.iter().enumerate() {
        position[d] = i;
    }
    let reduced_index = rep_dof.iter().map(|&r| position[r]).collect();
    Ok(PeriodicConstraint { pairings, reduced_index, kept })
}

impl PeriodicConstraint {
    pub fn pairings(&self) -> &[FacetPairing] {
        &self.pairings
    }

    pub fn n_full(&self) -> usize {
        self.reduced_index.len()
    }

    pub fn n_reduced(&self) -> usize {
        self.kept.len()
    }

    /// Reduced index of a full dof.
    pub fn reduced_index(&self, dof: usize) -> usize {
        self.reduced_index[dof]
    }

    /// Full dofs kept as representatives, in reduced order.
    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// True for dofs eliminated in favour of a periodic image.
    pub fn is_eliminated(&self, dof: usize) -> bool {
        self.kept[self.reduced_index[dof]] != dof
    }

    fn check(&self, n: usize) -> Result<(), PeriodicError> {
        if n != self.n_full() {
            return Err(PeriodicError::Dimension(format!("expected {} dofs, got {n}", self.n_full())));
        }
        Ok(())
    }

    /// `PᵀAP`
    pub fn reduce_matrix(&self, a: &CsrMatrix) -> Result<CsrMatrix, PeriodicError> {
        self.check(a.nrows())?;
        self.check(a.ncols())?;
        let mut trips = Vec::with_capacity(a.nnz());
        for i in 0..a.nrows() {
            let (cols, vals) = a.row(i);
            let ri = self.reduced_index[i];
            for (&j, &v) in cols.iter().zip(vals) {
                trips.push((ri, self.reduced_index[j], v));
            }
        }
        Ok(CsrMatrix::from_triplets(self.n_reduced(), self.n_reduced(), trips))
    }

    /// `Pᵀb` (sums the entries of each periodic class).
    pub fn reduce_vector(&self, b: &[Complex64]) -> Result<Vec<Complex64>, PeriodicError> {
        self.check(b.len())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_reduced()];
        for (i, v) in b.iter().enumerate() {
            out[self.reduced_index[i]] += v;
        }
        Ok(out)
    }

    /// Values at the representatives.
    pub fn restrict(&self, x: &[Complex64]) -> Result<Vec<Complex64>, PeriodicError> {
        self.check(x.len())?;
        Ok(self.kept.iter().map(|&d| x[d]).collect())
    }

    /// `P x`
    pub fn prolong(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n_reduced(), "reduced vector length mismatch");
        self.reduced_index.iter().map(|&r| x[r]).collect()
    }
}

/// Quadrature correspondence between the two faces of one axis.
#[derive(Debug, Clone)]
pub struct FaceCoupling {
    pub axis: usize,
    /// `x_slave − x_master`
    pub shift: [f64; 3],
    /// Own-side facet mass on both faces.
    pub own_mass: CsrMatrix,
    /// `⟨u_s(x + shift), v⟩` on the master face.
    pub master_cross: CsrMatrix,
    /// `⟨u_m(x − shift), v⟩` on the slave face.
    pub slave_cross: CsrMatrix,
}

impl FaceCoupling {
    /// `(θ_ms, θ_sm)` for gradient vector `g` (T/µm) and `F(t)` (µs).
    pub fn phase_angles(&self, g: &[f64; 3], big_f: f64) -> (f64, f64) {
        let theta = GAMMA * big_f * dot(g, &self.shift);
        (theta, -theta)
    }
}

/// Artificial-permeability coupling of all periodic axes.
#[derive(Debug, Clone)]
pub struct WeakPeriodicData {
    pub kappa_e: f64,
    pub faces: Vec<FaceCoupling>,
}

/// `κᵉ = max λ_max(D) / h` over cells touching the boundary, `h` being the
/// cell diameter.
pub fn compute_kappa_e(mesh: &Mesh, geo: &GeometryTables, media: &Media) -> f64 {
    let mut kappa: f64 = 0.0;
    for f in mesh.boundary_facets() {
        for &c in mesh.facet_cells(f) {
            kappa = kappa.max(media.diffusion(c).max_eigenvalue() / geo.cell_diameter[c]);
        }
    }
    kappa
}

/// Degree-2 rule on a facet of dimension `fd`: barycentric points and
/// weights relative to the facet measure.
fn facet_rule(fd: usize) -> Vec<(Vec<f64>, f64)> {
    match fd {
        0 => vec![(vec![1.0], 1.0)],
        1 => {
            let s = 0.5 / 3f64.sqrt();
            vec![(vec![0.5 + s, 0.5 - s], 0.5), (vec![0.5 - s, 0.5 + s], 0.5)]
        }
        _ => {
            let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
            vec![(vec![a, b, b], 1.0 / 3.0), (vec![b, a, b], 1.0 / 3.0), (vec![b, b, a], 1.0 / 3.0)]
        }
    }
}

/// Barycentric coordinates of `p` in facet `f`, if `p` lies on it within
/// `tol` (absolute distance).
fn locate(mesh: &Mesh, f: usize, p: &[f64; 3], tol: f64) -> Option<Vec<f64>> {
    let pts: Vec<[f64; 3]> = mesh.facet(f).iter().map(|&v| mesh.vertex(v)).collect();
    let sub = |a: &[f64; 3], b: &[f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let bary = match pts.len() {
        1 => vec![1.0],
        2 => {
            let e = sub(&pts[1], &pts[0]);
            let t = dot(&sub(p, &pts[0]), &e) / dot(&e, &e);
            vec![1.0 - t, t]
        }
        _ => {
            let (e1, e2, r) = (sub(&pts[1], &pts[0]), sub(&pts[2], &pts[0]), sub(p, &pts[0]));
            let (g11, g12, g22) = (dot(&e1, &e1), dot(&e1, &e2), dot(&e2, &e2));
            let (b1, b2) = (dot(&r, &e1), dot(&r, &e2));
            let det = g11 * g22 - g12 * g12;
            let s = (g22 * b1 - g12 * b2) / det;
            let t = (g11 * b2 - g12 * b1) / det;
            vec![1.0 - s - t, s, t]
        }
    };
    let mut q = [0.0; 3];
    for (x, l) in pts.iter().zip(&bary) {
        for k in 0..3 {
            q[k] += l * x[k];
        }
    }
    let size = pts.iter().map(|x| norm(&sub(x, &pts[0]))).fold(0.0, f64::max).max(tol);
    let inside = bary.iter().all(|&l| l >= -tol / size && l <= 1.0 + tol / size);
    (inside && norm(&sub(&q, p)) <= tol).then_some(bary)
}

/// Builds the face correspondences for the weak periodic coupling.
/// The faces need not carry matching meshes.
pub fn build_weak_periodic(
    mesh: &Mesh,
    geo: &GeometryTables,
    layout: &DofLayout,
    media: &Media,
    axes: &[usize],
    tol: f64,
) -> Result<WeakPeriodicData, PeriodicError> {
    if mesh.is_manifold() {
        return Err(PeriodicError::Dimension("periodic boundaries need a flat mesh".into()));
    }
    let (lo, hi) = mesh.bounding_box();
    let n = layout.n_dofs();
    let fd = mesh.topo_dim() - 1;
    let rule = facet_rule(fd);
    let field_dofs = |f: usize| -> Vec<usize> {
        let c = mesh.facet_cells(f)[0];
        let k = layout.cell_field(c);
        mesh.facet(f).iter().map(|&v| layout.dof(k, v).expect("facet of a field cell has dofs")).collect()
    };
    let mut sorted_axes = axes.to_vec();
    sorted_axes.sort_unstable();
    sorted_axes.dedup();
    let mut faces = Vec::new();
    for axis in sorted_axes {
        if axis >= mesh.embed_dim() {
            return Err(PeriodicError::Dimension(format!("axis {axis} outside the domain")));
        }
        let masters = face_facets(mesh, axis, lo[axis], tol);
        let slaves = face_facets(mesh, axis, hi[axis], tol);
        let mut shift = [0.0; 3];
        shift[axis] = hi[axis] - lo[axis];

        let mut own = Vec::new();
        for &f in masters.iter().chain(&slaves) {
            let dofs = field_dofs(f);
            for a in 0..dofs.len() {
                for b in 0..dofs.len() {
                    let diag = if a == b { 2.0 } else { 1.0 };
                    let m = geo.facet_measure[f] * diag / ((fd + 1) * (fd + 2)) as f64;
                    own.push((dofs[a], dofs[b], Complex64::new(m, 0.0)));
                }
            }
        }

        let cross = |from: &[usize], to: &[usize], sign: f64| -> Result<CsrMatrix, PeriodicError> {
            let mut trips = Vec::new();
            for &f in from {
                let pts: Vec<[f64; 3]> = mesh.facet(f).iter().map(|&v| mesh.vertex(v)).collect();
                let rows = field_dofs(f);
                for (bary, w) in &rule {
                    let mut target = [0.0; 3];
                    for (x, l) in pts.iter().zip(bary) {
                        for k in 0..3 {
                            target[k] += l * x[k];
                        }
                    }
                    target[axis] += sign * shift[axis];
                    let (host, hb) = to
                        .iter()
                        .find_map(|&g| locate(mesh, g, &target, tol).map(|b| (g, b)))
                        .ok_or(PeriodicError::Projection { axis, point: target })?;
                    let cols = field_dofs(host);
                    let weight = w * geo.facet_measure[f];
                    for (a, &r) in rows.iter().enumerate() {
                        for (b, &c) in cols.iter().enumerate() {
                            trips.push((r, c, Complex64::new(weight * bary[a] * hb[b], 0.0)));
                        }
                    }
                }
            }
            Ok(CsrMatrix::from_triplets(n, n, trips))
        };

        faces.push(FaceCoupling {
            axis,
            shift,
            own_mass: CsrMatrix::from_triplets(n, n, own),
            master_cross: cross(&masters, &slaves, 1.0)?,
            slave_cross: cross(&slaves, &masters, -1.0)?,
        });
    }
    Ok(WeakPeriodicData { kappa_e: compute_kappa_e(mesh, geo, media), faces })
}

impl WeakPeriodicData {
    /// `κᵉ · Σ own-side face mass`; the step matrix gains `θ` times this.
    pub fn own_matrix(&self, n: usize) -> CsrMatrix {
        if self.faces.is_empty() {
            return CsrMatrix::zeros(n, n);
        }
        let terms: Vec<(Complex64, &CsrMatrix)> =
            self.faces.iter().map(|f| (Complex64::new(self.kappa_e, 0.0), &f.own_mass)).collect();
        CsrMatrix::linear_combination(&terms)
    }

    /// `κᵉ Σ_axes (e^{iθ_ms} X_m + e^{iθ_sm} X_s) u`; the right-hand side
    /// gains `(1 − θ)` times this.
    pub fn cross_term(&self, g: &[f64; 3], big_f: f64, u: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
        for face in &self.faces {
            let (tms, tsm) = face.phase_angles(g, big_f);
            let (em, es) = (Complex64::from_polar(self.kappa_e, tms), Complex64::from_polar(self.kappa_e, tsm));
            let xm = face.master_cross.mul_vec(u);
            let xs = face.slave_cross.mul_vec(u);
            for i in 0..u.len() {
                out[i] += em * xm[i] + es * xs[i];
            }
        }
        out
    }
}

/// Step contributions of the weak periodic coupling: the matrix added to
/// the system (`θκᵉ` times the own-side face mass) and the vector added to
/// the right-hand side (`(1 − θ)κᵉ` times the phase-shifted cross-face
/// traces of `u_prev`), evaluated with `F(tⁿ)`.
pub fn weak_periodic_step_terms(
    data: &WeakPeriodicData,
    g: &[f64; 3],
    big_f: f64,
    theta: f64,
    u_prev: &[Complex64],
) -> (CsrMatrix, Vec<Complex64>) {
    let n = u_prev.len();
    let a = data.own_matrix(n).scaled(Complex64::new(theta, 0.0));
    let rhs = data.cross_term(g, big_f, u_prev).into_iter().map(|v| v * (1.0 - theta)).collect();
    (a, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_mass, DiffusionTensor, DEFAULT_T2};
    use crate::mesh::build_structured_mesh;
    use approx::assert_relative_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn single_cube_collapses_to_one_dof() {
        let m = build_structured_mesh(&[0.0; 3], &[1.0; 3], &[1, 1, 1]).unwrap();
        let lay = DofLayout::single(&m);
        let pc = build_strong_constraint(&m, &lay, &[0, 1, 2], m.default_periodic_tol()).unwrap();
        assert_eq!(pc.n_reduced(), 1);
    }

    #[test]
    fn torus_dof_count() {
        let m = build_structured_mesh(&[0.0; 3], &[2.0, 3.0, 1.0], &[2, 3, 4]).unwrap();
        let lay = DofLayout::single(&m);
        let pc = build_strong_constraint(&m, &lay, &[0, 1, 2], m.default_periodic_tol()).unwrap();
        assert_eq!(pc.n_reduced(), 2 * 3 * 4);
        let pc2 = build_strong_constraint(&m, &lay, &[2], m.default_periodic_tol()).unwrap();
        assert_eq!(pc2.n_reduced(), 3 * 4 * 4);
    }

    #[test]
    fn restriction_is_idempotent() {
        let m = build_structured_mesh(&[0.0, 0.0], &[1.0, 1.0], &[3, 3]).unwrap();
        let lay = DofLayout::single(&m);
        let pc = build_strong_constraint(&m, &lay, &[0, 1], m.default_periodic_tol()).unwrap();
        let x: Vec<Complex64> = (0..m.n_vertices()).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let once = pc.prolong(&pc.restrict(&x).unwrap());
        let twice = pc.prolong(&pc.restrict(&once).unwrap());
        assert_eq!(once, twice);
        let xr: Vec<Complex64> = (0..pc.n_reduced()).map(|i| c(i as f64)).collect();
        assert_eq!(pc.restrict(&pc.prolong(&xr)).unwrap(), xr);
    }

    #[test]
    fn reduced_identity_and_mass() {
        let m = build_structured_mesh(&[0.0; 3], &[2.0; 3], &[2, 2, 2]).unwrap();
        let geo = m.geometry().unwrap();
        let lay = DofLayout::single(&m);
        let pc = build_strong_constraint(&m, &lay, &[0, 1, 2], m.default_periodic_tol()).unwrap();
        let mass = assemble_mass(&m, &geo, &lay).unwrap();
        let r = pc.reduce_matrix(&mass).unwrap();
        let one = vec![c(1.0); pc.n_reduced()];
        assert_relative_eq!(r.bilinear(&one, &one).re, 8.0, max_relative = 1e-13);
        assert!(r.is_symmetric(1e-14));
        let id = pc.reduce_matrix(&CsrMatrix::identity(m.n_vertices())).unwrap();
        // the identity reduces to the class sizes on the diagonal
        assert_eq!(id.get(pc.reduced_index(0), pc.reduced_index(0)), c(8.0));
    }

    #[test]
    fn kappa_e_quotient() {
        let m = build_structured_mesh(&[0.0], &[5.0], &[10]).unwrap();
        let geo = m.geometry().unwrap();
        let media = Media::uniform(10, DiffusionTensor::Isotropic(3e-3), DEFAULT_T2).unwrap();
        assert_relative_eq!(compute_kappa_e(&m, &geo, &media), 6e-3, max_relative = 1e-14);
        let fine = build_structured_mesh(&[0.0], &[5.0], &[20]).unwrap();
        let media2 = Media::uniform(20, DiffusionTensor::Isotropic(3e-3), DEFAULT_T2).unwrap();
        assert_relative_eq!(compute_kappa_e(&fine, &fine.geometry().unwrap(), &media2), 1.2e-2, max_relative = 1e-14);
    }

    #[test]
    fn phase_angles_are_antisymmetric() {
        let m = build_structured_mesh(&[-5.0, -5.0], &[5.0, 5.0], &[4, 4]).unwrap();
        let geo = m.geometry().unwrap();
        let lay = DofLayout::single(&m);
        let media = Media::uniform(m.n_cells(), DiffusionTensor::Isotropic(3e-3), DEFAULT_T2).unwrap();
        let data = build_weak_periodic(&m, &geo, &lay, &media, &[0, 1], m.default_periodic_tol()).unwrap();
        for face in &data.faces {
            let (a, b) = face.phase_angles(&[1e-4, 2e-4, 0.0], 1234.5);
            assert_eq!(a + b, 0.0);
            assert_relative_eq!(a, GAMMA * 1234.5 * 10.0 * [1e-4, 2e-4][face.axis], max_relative = 1e-14);
        }
    }

    #[test]
    fn uniform_field_is_fixed_without_gradient() {
        let m = build_structured_mesh(&[0.0, 0.0], &[1.0, 2.0], &[3, 5]).unwrap();
        let geo = m.geometry().unwrap();
        let lay = DofLayout::single(&m);
        let media = Media::uniform(m.n_cells(), DiffusionTensor::Isotropic(1.0), DEFAULT_T2).unwrap();
        let data = build_weak_periodic(&m, &geo, &lay, &media, &[0, 1], m.default_periodic_tol()).unwrap();
        let u = vec![c(1.0); m.n_vertices()];
        let (a, rhs) = weak_periodic_step_terms(&data, &[0.0; 3], 0.0, 0.5, &u);
        let au = a.mul_vec(&u);
        for (x, y) in au.iter().zip(&rhs) {
            assert!((x - y).norm() < 1e-14);
        }
        assert!(a.is_symmetric(1e-15));
    }

    #[test]
    fn matching_faces_reproduce_vertex_pairs() {
        let m = build_structured_mesh(&[0.0, 0.0], &[1.0, 1.0], &[4, 3]).unwrap();
        let geo = m.geometry().unwrap();
        let lay = DofLayout::single(&m);
        let media = Media::uniform(m.n_cells(), DiffusionTensor::Isotropic(1.0), DEFAULT_T2).unwrap();
        let data = build_weak_periodic(&m, &geo, &lay, &media, &[0], m.default_periodic_tol()).unwrap();
        let pairs = find_periodic_pairs(&m, 0, m.default_periodic_tol()).unwrap();
        // for matching meshes the cross matrix equals the own mass with
        // columns moved to the partner vertices
        let x = &data.faces[0].master_cross;
        for &(mv, sv) in &pairs.vertex_pairs {
            for &(mw, sw) in &pairs.vertex_pairs {
                let own = data.faces[0].own_mass.get(mv, mw);
                assert!((x.get(mv, sw) - own).norm() < 1e-14);
                assert!((data.faces[0].slave_cross.get(sv, mw) - data.faces[0].own_mass.get(sv, sw)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_kappa_is_noop() {
        let m = build_structured_mesh(&[0.0, 0.0], &[1.0, 1.0], &[2, 2]).unwrap();
        let geo = m.geometry().unwrap();
        let lay = DofLayout::single(&m);
        let media = Media::uniform(m.n_cells(), DiffusionTensor::Isotropic(1.0), DEFAULT_T2).unwrap();
        let mut data = build_weak_periodic(&m, &geo, &lay, &media, &[0, 1], m.default_periodic_tol()).unwrap();
        data.kappa_e = 0.0;
        let u = vec![c(2.0); m.n_vertices()];
        let (a, rhs) = weak_periodic_step_terms(&data, &[1e-4, 0.0, 0.0], 100.0, 0.5, &u);
        assert_eq!(a.max_abs(), 0.0);
        assert!(rhs.iter().all(|v| v.norm() == 0.0));
    }
}
