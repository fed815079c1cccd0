//! P1 assembly of the time-independent matrices of both formulations.
//!
//! Every matrix acts on the dofs of a [`DofLayout`]. In the two-field
//! (partition of unity) layout, field `k` lives on the vertices touched by
//! cells of phase `k`, volume terms of a cell only involve the field of its
//! phase, and only the interface matrices couple the two fields.
//!
//! Gradient-dependent matrices are assembled for a unit direction `q` and
//! scaled by the amplitude (`J`, `C`, `K₁`, `K₂`, `B`) or its square (`Q`) at
//! step time.

use std::collections::HashMap;

use log::warn;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::geometry::dot;
use crate::mesh::{interface_facets, CompartmentMarker, GeometryTables, InterfaceFacetSet, Mesh, PhaseFunction};
use crate::sparse::CsrMatrix;

/// Default transverse relaxation time (µs); effectively no relaxation.
pub const DEFAULT_T2: f64 = 1e16;

/// Cells per parallel work item.
const CELL_CHUNK: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("cell {cell}: diffusion tensor is not symmetric")]
    AsymmetricTensor { cell: usize },
    #[error("cell {cell}: diffusion tensor is not positive definite")]
    NotPositiveDefinite { cell: usize },
    #[error("cell {cell}: T2 must be positive, got {t2}")]
    InvalidT2 { cell: usize, t2: f64 },
    #[error("no diffusion parameters for compartment {0}")]
    MissingCompartment(u32),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("interface facet {facet} has no dof in field {field}")]
    Support { facet: usize, field: usize },
}

/// Diffusion coefficient of a cell in µm²/µs (= mm²/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionTensor {
    Isotropic(f64),
    Anisotropic([[f64; 3]; 3]),
}

impl DiffusionTensor {
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        match *self {
            DiffusionTensor::Isotropic(d) => [[d, 0.0, 0.0], [0.0, d, 0.0], [0.0, 0.0, d]],
            DiffusionTensor::Anisotropic(m) => m,
        }
    }

    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        match *self {
            DiffusionTensor::Isotropic(d) => v.map(|x| d * x),
            DiffusionTensor::Anisotropic(m) => [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)],
        }
    }

    /// Largest eigenvalue.
    pub fn max_eigenvalue(&self) -> f64 {
        match *self {
            DiffusionTensor::Isotropic(d) => d,
            DiffusionTensor::Anisotropic(m) => {
                let m = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
                m.symmetric_eigenvalues().max()
            }
        }
    }

    fn validate(&self, cell: usize) -> Result<(), AssemblyError> {
        let m = self.matrix();
        let scale = m.iter().flatten().fold(0.0_f64, |a, x| a.max(x.abs()));
        for i in 0..3 {
            for j in 0..i {
                if (m[i][j] - m[j][i]).abs() > 1e-12 * scale || !m[i][j].is_finite() {
                    return Err(AssemblyError::AsymmetricTensor { cell });
                }
            }
        }
        // leading principal minors
        let m1 = m[0][0];
        let m2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let m3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if !(m1 > 0.0 && m2 > 0.0 && m3 > 0.0) {
            return Err(AssemblyError::NotPositiveDefinite { cell });
        }
        Ok(())
    }
}

/// Per-cell diffusion tensors and T2 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Media {
    diffusion: Vec<DiffusionTensor>,
    t2: Vec<f64>,
}

impl Media {
    pub fn new(diffusion: Vec<DiffusionTensor>, t2: Vec<f64>) -> Result<Self, AssemblyError> {
        if diffusion.len() != t2.len() {
            return Err(AssemblyError::Dimension(format!(
                "{} diffusion tensors but {} T2 values",
                diffusion.len(),
                t2.len()
            )));
        }
        for (cell, d) in diffusion.iter().enumerate() {
            d.validate(cell)?;
        }
        for (cell, &v) in t2.iter().enumerate() {
            if !(v > 0.0) {
                return Err(AssemblyError::InvalidT2 { cell, t2: v });
            }
        }
        Ok(Self { diffusion, t2 })
    }

    pub fn uniform(n_cells: usize, diffusion: DiffusionTensor, t2: f64) -> Result<Self, AssemblyError> {
        Self::new(vec![diffusion; n_cells], vec![t2; n_cells])
    }

    /// Looks up `(D, T2)` for each cell's compartment.
    pub fn from_marker(
        marker: &CompartmentMarker,
        lookup: impl Fn(u32) -> Option<(DiffusionTensor, f64)>,
    ) -> Result<Self, AssemblyError> {
        let mut d = Vec::with_capacity(marker.len());
        let mut t2 = Vec::with_capacity(marker.len());
        for &m in marker.values() {
            let (dm, tm) = lookup(m).ok_or(AssemblyError::MissingCompartment(m))?;
            d.push(dm);
            t2.push(tm);
        }
        Self::new(d, t2)
    }

    pub fn len(&self) -> usize {
        self.t2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t2.is_empty()
    }

    pub fn diffusion(&self, cell: usize) -> &DiffusionTensor {
        &self.diffusion[cell]
    }

    pub fn t2(&self, cell: usize) -> f64 {
        self.t2[cell]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutMode {
    /// One continuous field on all cells.
    Single,
    /// Two fields, one per phase, coupled through interface terms.
    Pufem,
}

/// Map from (field, vertex) to dof index.
#[derive(Debug, Clone, PartialEq)]
pub struct DofLayout {
    mode: LayoutMode,
    maps: Vec<Vec<usize>>,
    dof_vertex: Vec<usize>,
    dof_field: Vec<usize>,
    cell_field: Vec<usize>,
}

impl DofLayout {
    /// Field `k` of a two-field layout covers the vertices of phase-`k`
    /// cells; dofs are numbered field by field in vertex order.
    pub fn new(mesh: &Mesh, phase: &PhaseFunction, mode: LayoutMode) -> Result<Self, AssemblyError> {
        if phase.len() != mesh.n_cells() {
            return Err(AssemblyError::Dimension(format!(
                "phase has {} values for {} cells",
                phase.len(),
                mesh.n_cells()
            )));
        }
        let nv = mesh.n_vertices();
        let cell_field: Vec<usize> = match mode {
            LayoutMode::Single => vec![0; mesh.n_cells()],
            LayoutMode::Pufem => phase.values().iter().map(|&p| p as usize).collect(),
        };
        let n_fields = match mode {
            LayoutMode::Single => 1,
            LayoutMode::Pufem => 2,
        };
        let mut support = vec![vec![false; nv]; n_fields];
        for c in 0..mesh.n_cells() {
            for &v in mesh.cell(c) {
                support[cell_field[c]][v] = true;
            }
        }
        let mut maps = vec![vec![usize::MAX; nv]; n_fields];
        let mut dof_vertex = Vec::new();
        let mut dof_field = Vec::new();
        for k in 0..n_fields {
            for v in 0..nv {
                if support[k][v] {
                    maps[k][v] = dof_vertex.len();
                    dof_vertex.push(v);
                    dof_field.push(k);
                }
            }
        }
        Ok(Self { mode, maps, dof_vertex, dof_field, cell_field })
    }

    pub fn single(mesh: &Mesh) -> Self {
        Self::new(mesh, &PhaseFunction::uniform(mesh.n_cells()), LayoutMode::Single)
            .expect("uniform phase always matches")
    }

    pub fn mode(&self) -> LayoutMode {
        self.mode
    }

    pub fn n_fields(&self) -> usize {
        self.maps.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.maps[0].len()
    }

    pub fn dof(&self, field: usize, vertex: usize) -> Option<usize> {
        self.maps.get(field).and_then(|m| m.get(vertex)).copied().filter(|&d| d != usize::MAX)
    }

    pub fn dof_vertex(&self, dof: usize) -> usize {
        self.dof_vertex[dof]
    }

    pub fn dof_field(&self, dof: usize) -> usize {
        self.dof_field[dof]
    }

    pub fn cell_field(&self, cell: usize) -> usize {
        self.cell_field[cell]
    }

    /// Dofs of the vertices of `cell` in the cell's own field.
    pub fn cell_dofs(&self, mesh: &Mesh, cell: usize) -> Vec<usize> {
        let map = &self.maps[self.cell_field[cell]];
        mesh.cell(cell).iter().map(|&v| map[v]).collect()
    }

    fn check(&self, mesh: &Mesh) -> Result<(), AssemblyError> {
        if self.n_vertices() != mesh.n_vertices() || self.cell_field.len() != mesh.n_cells() {
            return Err(AssemblyError::Dimension("layout does not belong to this mesh".into()));
        }
        Ok(())
    }
}

/// Cell weight for [`assemble_weighted_mass`].
#[derive(Debug, Clone, Copy)]
pub enum Weight<'a> {
    PerCell(&'a [f64]),
    /// `w(x) = slope·x + offset`.
    Affine {
        slope: [f64; 3],
        offset: f64,
    },
}

type Triplets = Vec<(usize, usize, Complex64)>;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Runs `kernel` on `0..n_items` in fixed-size chunks and concatenates the
/// triplets in item order, so the result does not depend on the thread count.
fn assemble_parallel<F>(n: usize, n_items: usize, kernel: F) -> CsrMatrix
where
    F: Fn(usize, &mut Triplets) + Sync,
{
    let n_chunks = n_items.div_ceil(CELL_CHUNK);
    let parts: Vec<Triplets> = (0..n_chunks)
        .into_par_iter()
        .map(|ch| {
            let mut out = Vec::new();
            for item in ch * CELL_CHUNK..((ch + 1) * CELL_CHUNK).min(n_items) {
                kernel(item, &mut out);
            }
            out
        })
        .collect();
    CsrMatrix::from_triplets(n, n, parts.concat())
}

/// P1 mass entry on a simplex of dimension `d`.
fn simplex_mass(measure: f64, d: usize, a: usize, b: usize) -> f64 {
    let diag = if a == b { 2.0 } else { 1.0 };
    measure * diag / ((d + 1) * (d + 2)) as f64
}

/// `∫ λ_k λ_a λ_b` over a simplex of dimension `d`.
fn simplex_triple(measure: f64, d: usize, k: usize, a: usize, b: usize) -> f64 {
    let mult = if k == a && a == b {
        6.0
    } else if k == a || k == b || a == b {
        2.0
    } else {
        1.0
    };
    measure * mult / ((d + 1) * (d + 2) * (d + 3)) as f64
}

/// Mass matrix restricted to each cell's field.
pub fn assemble_mass(mesh: &Mesh, geo: &GeometryTables, layout: &DofLayout) -> Result<CsrMatrix, AssemblyError> {
    assemble_weighted_mass(mesh, geo, layout, Weight::PerCell(&vec![1.0; mesh.n_cells()]))
}

/// Mass matrix weighted by a per-cell constant or an affine function
/// (integrated exactly).
pub fn assemble_weighted_mass(
    mesh: &Mesh,
    geo: &GeometryTables,
    layout: &DofLayout,
    weight: Weight,
) -> Result<CsrMatrix, AssemblyError> {
    layout.check(mesh)?;
    if let Weight::PerCell(w) = weight {
        if w.len() != mesh.n_cells() {
            return Err(AssemblyError::Dimension(format!("{} weights for {} cells", w.len(), mesh.n_cells())));
        }
    }
    let d = mesh.topo_dim();
    Ok(assemble_parallel(layout.n_dofs(), mesh.n_cells(), |c, out| {
        let dofs = layout.cell_dofs(mesh, c);
        let meas = geo.cell_measure[c];
        match weight {
            Weight::PerCell(w) => {
                for a in 0..=d {
                    for b in 0..=d {
                        out.push((dofs[a], dofs[b], re(w[c] * simplex_mass(meas, d, a, b))));
                    }
                }
            }
            Weight::Affine { slope, offset } => {
                let wv: Vec<f64> = mesh.cell(c).iter().map(|&v| dot(&slope, &mesh.vertex(v)) + offset).collect();
                for a in 0..=d {
                    for b in 0..=d {
                        let s: f64 = (0..=d).map(|k| wv[k] * simplex_triple(meas, d, k, a, b)).sum();
                        out.push((dofs[a], dofs[b], re(s)));
                    }
                }
            }
        }
    }))
}

/// `∫ ∇φ_a · D ∇φ_b` with the cell-wise tensor.
pub fn assemble_stiffness(
    mesh: &Mesh,
    geo: &GeometryTables,
    media: &Media,
    layout: &DofLayout,
) -> Result<CsrMatrix, AssemblyError> {
    layout.check(mesh)?;
    check_media(mesh, media)?;
    let d = mesh.topo_dim();
    Ok(assemble_parallel(layout.n_dofs(), mesh.n_cells(), |c, out| {
        let dofs = layout.cell_dofs(mesh, c);
        let grads = &geo.cell_gradients[c];
        let meas = geo.cell_measure[c];
        let tensor = media.diffusion(c);
        for b in 0..=d {
            let dg = tensor.apply(&grads[b]);
            for a in 0..=d {
                out.push((dofs[a], dofs[b], re(meas * dot(&grads[a], &dg))));
            }
        }
    }))
}

/// Relaxation matrix: mass weighted by `1/T2`.
pub fn assemble_relaxation(
    mesh: &Mesh,
    geo: &GeometryTables,
    media: &Media,
    layout: &DofLayout,
) -> Result<CsrMatrix, AssemblyError> {
    check_media(mesh, media)?;
    let w: Vec<f64> = (0..mesh.n_cells()).map(|c| 1.0 / media.t2(c)).collect();
    assemble_weighted_mass(mesh, geo, layout, Weight::PerCell(&w))
}

/// Position matrix: mass weighted by `q·x`.
pub fn assemble_position(
    mesh: &Mesh,
    geo: &GeometryTables,
    layout: &DofLayout,
    q: [f64; 3],
) -> Result<CsrMatrix, AssemblyError> {
    assemble_weighted_mass(mesh, geo, layout, Weight::Affine { slope: q, offset: 0.0 })
}

/// Gradient direction seen by a cell: the tangential part of `q` on
/// manifold cells, `q` itself otherwise.
pub fn cell_direction(mesh: &Mesh, cell: usize, q: &[f64; 3]) -> [f64; 3] {
    if mesh.topo_dim() == 1 && mesh.embed_dim() > 1 {
        let vs = mesh.cell(cell);
        let (a, b) = (mesh.vertex(vs[0]), mesh.vertex(vs[1]));
        let t = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let s = dot(&t, q) / dot(&t, &t);
        t.map(|x| x * s)
    } else {
        *q
    }
}

/// Quadratic matrix: mass weighted by `q·Dq`.
pub fn assemble_quadratic(
    mesh: &Mesh,
    geo: &GeometryTables,
    media: &Media,
    layout: &DofLayout,
    q: [f64; 3],
) -> Result<CsrMatrix, AssemblyError> {
    check_media(mesh, media)?;
    let w: Vec<f64> = (0..mesh.n_cells())
        .map(|c| {
            let qc = cell_direction(mesh, c, &q);
            dot(&qc, &media.diffusion(c).apply(&qc))
        })
        .collect();
    assemble_weighted_mass(mesh, geo, layout, Weight::PerCell(&w))
}

/// Convection matrix `(q·D∇u + ∇u·Dq, v) = 2(Dq·∇u, v)` (symmetric `D`).
pub fn assemble_convection(
    mesh: &Mesh,
    geo: &GeometryTables,
    media: &Media,
    layout: &DofLayout,
    q: [f64; 3],
) -> Result<CsrMatrix, AssemblyError> {
    layout.check(mesh)?;
    check_media(mesh, media)?;
    let d = mesh.topo_dim();
    Ok(assemble_parallel(layout.n_dofs(), mesh.n_cells(), |c, out| {
        let dofs = layout.cell_dofs(mesh, c);
        let grads = &geo.cell_gradients[c];
        let dq = media.diffusion(c).apply(&cell_direction(mesh, c, &q));
        let avg = geo.cell_measure[c] / (d + 1) as f64;
        for b in 0..=d {
            let s = 2.0 * dot(&dq, &grads[b]) * avg;
            for a in 0..=d {
                out.push((dofs[a], dofs[b], re(s)));
            }
        }
    }))
}

fn facet_mass(geo: &GeometryTables, mesh: &Mesh, f: usize, a: usize, b: usize) -> f64 {
    simplex_mass(geo.facet_measure[f], mesh.topo_dim() - 1, a, b)
}

/// Interface matrix `κ⟨[[u]], [[v]]⟩` with `[[a]] = a₀ − a₁`.
pub fn assemble_interface(
    mesh: &Mesh,
    geo: &GeometryTables,
    iface: &InterfaceFacetSet,
    kappa: f64,
    layout: &DofLayout,
) -> Result<CsrMatrix, AssemblyError> {
    layout.check(mesh)?;
    let dofs = interface_dofs(mesh, iface, layout)?;
    let n = mesh.topo_dim();
    Ok(assemble_parallel(layout.n_dofs(), iface.len(), |i, out| {
        let f = iface.facets[i];
        let (d0, d1) = &dofs[i];
        for a in 0..n {
            for b in 0..n {
                let m = kappa * facet_mass(geo, mesh, f, a, b);
                out.push((d0[a], d0[b], re(m)));
                out.push((d0[a], d1[b], re(-m)));
                out.push((d1[a], d0[b], re(-m)));
                out.push((d1[a], d1[b], re(m)));
            }
        }
    }))
}

/// Dofs of one interface facet on the phase-0 and phase-1 side.
type SidedDofs = (Vec<usize>, Vec<usize>);

fn interface_dofs(mesh: &Mesh, iface: &InterfaceFacetSet, layout: &DofLayout) -> Result<Vec<SidedDofs>, AssemblyError> {
    if iface.is_empty() {
        return Ok(Vec::new());
    }
    if layout.mode() != LayoutMode::Pufem {
        return Err(AssemblyError::Dimension("interface terms need the two-field layout".into()));
    }
    iface
        .facets
        .iter()
        .map(|&f| {
            let field = |k: usize| {
                mesh.facet(f)
                    .iter()
                    .map(|&v| layout.dof(k, v).ok_or(AssemblyError::Support { facet: f, field: k }))
                    .collect::<Result<Vec<_>, _>>()
            };
            Ok((field(0)?, field(1)?))
        })
        .collect()
}

/// Interface flux matrices of the transformed formulation, for unit
/// direction `q`, with `w_k = D_k q·n⁰` on side `k`:
///
/// * `K₁(u, v) = ⟨w₀u₀ + w₁u₁, v₀ − v₁⟩` (jump of the flux with each side's
///   outward normal),
/// * `K₂(u, v) = ¼⟨w₀u₀ − w₁u₁, v₀ + v₁⟩` (average).
///
/// `−½K₁ − 2K₂` is the per-side facet term `−(w₀u₀v₀ − w₁u₁v₁)`.
pub fn assemble_interface_strong(
    mesh: &Mesh,
    geo: &GeometryTables,
    iface: &InterfaceFacetSet,
    media: &Media,
    layout: &DofLayout,
    q: [f64; 3],
) -> Result<(CsrMatrix, CsrMatrix), AssemblyError> {
    layout.check(mesh)?;
    check_media(mesh, media)?;
    let dofs = interface_dofs(mesh, iface, layout)?;
    let n = mesh.topo_dim();
    let weights: Vec<[f64; 2]> = (0..iface.len())
        .map(|i| {
            let (c0, c1) = iface.cells[i];
            let nrm = iface.normals[i];
            let w = |c: usize| dot(&media.diffusion(c).apply(&cell_direction(mesh, c, &q)), &nrm);
            [w(c0), w(c1)]
        })
        .collect();
    let sign = [1.0, -1.0];
    let build = |average: bool| {
        assemble_parallel(layout.n_dofs(), iface.len(), |i, out| {
            let f = iface.facets[i];
            let (d0, d1) = &dofs[i];
            let side = [d0, d1];
            for a in 0..n {
                for b in 0..n {
                    let m = facet_mass(geo, mesh, f, a, b);
                    for (ta, rows) in side.iter().enumerate() {
                        for (tb, cols) in side.iter().enumerate() {
                            let v = if average {
                                0.25 * sign[tb] * weights[i][tb] * m
                            } else {
                                sign[ta] * weights[i][tb] * m
                            };
                            out.push((rows[a], cols[b], re(v)));
                        }
                    }
                }
            }
        })
    };
    Ok((build(false), build(true)))
}

/// Boundary flux matrix `⟨(Dq·n) u, v⟩` over exterior facets.
///
/// Interior non-interface facets are included as well when the flux
/// weights of the incident cells of one field do not cancel (coefficient
/// jumps inside a phase, bends and branch points of manifold meshes), so
/// that `−C + B − ½K₁ − 2K₂` always equals the cell-wise skew form
/// `(u Dq, ∇v) − (Dq·∇u, v)`.
pub fn assemble_boundary(
    mesh: &Mesh,
    geo: &GeometryTables,
    iface: &InterfaceFacetSet,
    media: &Media,
    layout: &DofLayout,
    q: [f64; 3],
) -> Result<CsrMatrix, AssemblyError> {
    layout.check(mesh)?;
    check_media(mesh, media)?;
    let on_interface: std::collections::HashSet<usize> = iface.facets.iter().copied().collect();
    let n = mesh.topo_dim();
    Ok(assemble_parallel(layout.n_dofs(), mesh.n_facets(), |f, out| {
        if on_interface.contains(&f) {
            return;
        }
        for field in 0..layout.n_fields() {
            let cells: Vec<usize> =
                mesh.facet_cells(f).iter().copied().filter(|&c| layout.cell_field(c) == field).collect();
            if cells.is_empty() {
                continue;
            }
            let w: Vec<f64> = cells
                .iter()
                .map(|&c| {
                    let dq = media.diffusion(c).apply(&cell_direction(mesh, c, &q));
                    dot(&dq, &geo.outward_normal(mesh, c, f))
                })
                .collect();
            let total: f64 = w.iter().sum();
            let size: f64 = w.iter().map(|x| x.abs()).sum();
            if cells.len() > 1 && total.abs() <= 1e-12 * size {
                continue;
            }
            let dofs: Vec<usize> = mesh
                .facet(f)
                .iter()
                .map(|&v| layout.dof(field, v).expect("facet vertex of a field cell has a dof"))
                .collect();
            for &wc in &w {
                for a in 0..n {
                    for b in 0..n {
                        out.push((dofs[a], dofs[b], re(wc * facet_mass(geo, mesh, f, a, b))));
                    }
                }
            }
        }
    }))
}

fn check_media(mesh: &Mesh, media: &Media) -> Result<(), AssemblyError> {
    if media.len() != mesh.n_cells() {
        return Err(AssemblyError::Dimension(format!("media has {} cells, mesh has {}", media.len(), mesh.n_cells())));
    }
    Ok(())
}

/// Zeroes the components of `q` outside the embedding dimension.
pub fn project_direction(mesh: &Mesh, q: [f64; 3]) -> [f64; 3] {
    let mut p = q;
    for x in p.iter_mut().skip(mesh.embed_dim()) {
        *x = 0.0;
    }
    if p != q {
        warn!("gradient direction {q:?} has components outside the {}D domain; using {p:?}", mesh.embed_dim());
    }
    p
}

/// Everything a simulation needs from the geometry and the media.
#[derive(Debug, Clone, Copy)]
pub struct Domain<'a> {
    pub mesh: &'a Mesh,
    pub geometry: &'a GeometryTables,
    pub phase: &'a PhaseFunction,
    pub media: &'a Media,
}

/// Matrices that only appear in the transformed formulation.
#[derive(Debug, Clone)]
pub struct TransformedTerms {
    /// `C`
    pub convection: CsrMatrix,
    /// `Q`
    pub quadratic: CsrMatrix,
    /// `K₁`
    pub jump: CsrMatrix,
    /// `K₂`
    pub average: CsrMatrix,
    /// `B`
    pub boundary: CsrMatrix,
}

/// Time-independent matrices for one gradient direction.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub layout: DofLayout,
    /// Unit gradient direction after projection onto the domain.
    pub direction: [f64; 3],
    pub kappa: f64,
    pub interface: InterfaceFacetSet,
    /// `M`
    pub mass: CsrMatrix,
    /// `S`
    pub stiffness: CsrMatrix,
    /// `R`
    pub relaxation: CsrMatrix,
    /// `J`
    pub position: CsrMatrix,
    /// `I`
    pub jump_penalty: CsrMatrix,
    pub transformed: Option<TransformedTerms>,
}

impl FemSystem {
    /// Assembles all constituents. `kappa` is the membrane permeability in
    /// µm/µs (= m/s); it is ignored by the single-field layout.
    pub fn assemble(
        domain: &Domain,
        kappa: f64,
        direction: [f64; 3],
        mode: LayoutMode,
        transformed: bool,
    ) -> Result<Self, AssemblyError> {
        let Domain { mesh, geometry: geo, phase, media } = *domain;
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(AssemblyError::Dimension(format!("permeability must be non-negative, got {kappa}")));
        }
        check_media(mesh, media)?;
        let layout = DofLayout::new(mesh, phase, mode)?;
        let q = project_direction(mesh, direction);
        let interface = match mode {
            LayoutMode::Single => InterfaceFacetSet::default(),
            LayoutMode::Pufem => interface_facets(mesh, geo, phase),
        };
        let mass = assemble_mass(mesh, geo, &layout)?;
        let stiffness = assemble_stiffness(mesh, geo, media, &layout)?;
        let relaxation = assemble_relaxation(mesh, geo, media, &layout)?;
        let position = assemble_position(mesh, geo, &layout, q)?;
        let jump_penalty = assemble_interface(mesh, geo, &interface, kappa, &layout)?;
        let transformed = if transformed {
            let (jump, average) = assemble_interface_strong(mesh, geo, &interface, media, &layout, q)?;
            Some(TransformedTerms {
                convection: assemble_convection(mesh, geo, media, &layout, q)?,
                quadratic: assemble_quadratic(mesh, geo, media, &layout, q)?,
                jump,
                average,
                boundary: assemble_boundary(mesh, geo, &interface, media, &layout, q)?,
            })
        } else {
            None
        };
        Ok(Self {
            layout,
            direction: q,
            kappa,
            interface,
            mass,
            stiffness,
            relaxation,
            position,
            jump_penalty,
            transformed,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.layout.n_dofs()
    }
}

/// Per-dof values from per-cell values: each dof takes the mean over the
/// incident cells of its field.
pub fn cell_values_to_dofs(mesh: &Mesh, layout: &DofLayout, cell_values: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; layout.n_dofs()];
    let mut count = vec![0usize; layout.n_dofs()];
    for c in 0..mesh.n_cells() {
        for d in layout.cell_dofs(mesh, c) {
            sum[d] += cell_values[c];
            count[d] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &n)| s / n.max(1) as f64).collect()
}

/// Compartment id → value lookup turned into per-cell values.
pub fn per_cell<T: Copy>(marker: &CompartmentMarker, table: &HashMap<u32, T>) -> Result<Vec<T>, AssemblyError> {
    marker.values().iter().map(|m| table.get(m).copied().ok_or(AssemblyError::MissingCompartment(*m))).collect()
}
