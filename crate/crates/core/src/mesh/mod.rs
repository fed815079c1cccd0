//! Simplicial meshes and the compartment machinery built on top of them.
//!
//! A [`Mesh`] stores vertices as 3-tuples (unused trailing coordinates are
//! zero), cells as flat vertex-index lists and the facet/cell incidence
//! computed at construction. Meshes are immutable once built.

pub(crate) mod geometry;
mod interface;
pub(crate) mod pairing;
mod structured;

use std::collections::HashMap;

use thiserror::Error;

pub use geometry::{simplex_measure, GeometryTables};
pub use interface::{interface_facets, InterfaceFacetSet};
pub use pairing::{find_periodic_pairs, FacetPairing};
pub use structured::{build_graph_mesh, build_layered_disk, build_structured_mesh};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cell {cell} references vertex {vertex}, but the mesh has {n_vertices} vertices")]
    VertexOutOfBounds { cell: usize, vertex: usize, n_vertices: usize },
    #[error("degenerate geometry: cell {cell} has measure {measure:e}")]
    DegenerateCell { cell: usize, measure: f64 },
    #[error("facet {facet} is shared by {count} cells")]
    NonManifoldFacet { facet: usize, count: usize },
    #[error("periodic pairing failed along axis {axis}: no partner for facet centred at {centroid:?}")]
    PairingFailure { axis: usize, centroid: [f64; 3] },
    #[error("{0}")]
    Length(String),
}

/// Sentinel used to pad facet keys of lower-dimensional meshes.
const PAD: usize = usize::MAX;

type FacetKey = [usize; 3];

/// Simplicial mesh with cells of topological dimension `topo_dim` embedded
/// in `embed_dim`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    embed_dim: usize,
    topo_dim: usize,
    vertices: Vec<[f64; 3]>,
    cells: Vec<usize>,
    facets: Vec<usize>,
    facet_cell_offsets: Vec<usize>,
    facet_cell_list: Vec<usize>,
    cell_facets: Vec<usize>,
}

impl Mesh {
    /// Builds a mesh and its facet incidence, validating index bounds, cell
    /// measures and facet sharing.
    ///
    /// Facets shared by more than two cells are accepted only for manifold
    /// meshes (`topo_dim < embed_dim`), where they model branch points.
    pub fn new(
        embed_dim: usize,
        topo_dim: usize,
        mut vertices: Vec<[f64; 3]>,
        cells: Vec<usize>,
    ) -> Result<Self, MeshError> {
        if !(1..=3).contains(&embed_dim) || !(1..=3).contains(&topo_dim) || topo_dim > embed_dim {
            return Err(MeshError::InvalidArgument(format!(
                "unsupported dimensions: topological {topo_dim}, embedding {embed_dim}"
            )));
        }
        if topo_dim == 2 && embed_dim == 3 {
            return Err(MeshError::InvalidArgument("surface (2D-in-3D) meshes are not supported".into()));
        }
        let nv = topo_dim + 1;
        if !cells.len().is_multiple_of(nv) {
            return Err(MeshError::InvalidArgument(format!(
                "cell list length {} is not a multiple of {nv}",
                cells.len()
            )));
        }
        if cells.is_empty() {
            return Err(MeshError::InvalidArgument("mesh has no cells".into()));
        }
        for v in vertices.iter_mut() {
            for x in v.iter_mut().skip(embed_dim) {
                *x = 0.0;
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(MeshError::InvalidArgument("non-finite vertex coordinate".into()));
            }
        }
        let n_vertices = vertices.len();
        for (cell, chunk) in cells.chunks(nv).enumerate() {
            for &vertex in chunk {
                if vertex >= n_vertices {
                    return Err(MeshError::VertexOutOfBounds { cell, vertex, n_vertices });
                }
            }
        }

        let mut mesh = Mesh {
            embed_dim,
            topo_dim,
            vertices,
            cells,
            facets: Vec::new(),
            facet_cell_offsets: Vec::new(),
            facet_cell_list: Vec::new(),
            cell_facets: Vec::new(),
        };

        for c in 0..mesh.n_cells() {
            let pts: Vec<[f64; 3]> = mesh.cell(c).iter().map(|&v| mesh.vertices[v]).collect();
            let measure = simplex_measure(&pts);
            let diam = geometry::diameter(&pts);
            if !(measure > 1e-12 * diam.powi(topo_dim as i32)) {
                return Err(MeshError::DegenerateCell { cell: c, measure });
            }
        }

        mesh.build_facets()?;
        Ok(mesh)
    }

    fn build_facets(&mut self) -> Result<(), MeshError> {
        let nv = self.topo_dim + 1;
        let nf = self.topo_dim;
        let mut index: HashMap<FacetKey, usize> = HashMap::new();
        let mut facets = Vec::new();
        let mut incidence: Vec<Vec<usize>> = Vec::new();
        let mut cell_facets = Vec::with_capacity(self.cells.len());
        for c in 0..self.n_cells() {
            let cell = &self.cells[c * nv..(c + 1) * nv];
            for skip in 0..nv {
                let mut key = [PAD; 3];
                let mut k = 0;
                for (i, &v) in cell.iter().enumerate() {
                    if i != skip {
                        key[k] = v;
                        k += 1;
                    }
                }
                key[..nf].sort_unstable();
                let id = *index.entry(key).or_insert_with(|| {
                    facets.extend_from_slice(&key[..nf]);
                    incidence.push(Vec::new());
                    incidence.len() - 1
                });
                incidence[id].push(c);
                cell_facets.push(id);
            }
        }
        let manifold = self.topo_dim < self.embed_dim;
        let mut offsets = Vec::with_capacity(incidence.len() + 1);
        let mut list = Vec::new();
        offsets.push(0);
        for (f, cells) in incidence.iter().enumerate() {
            if cells.len() > 2 && !manifold {
                return Err(MeshError::NonManifoldFacet { facet: f, count: cells.len() });
            }
            list.extend_from_slice(cells);
            offsets.push(list.len());
        }
        self.facets = facets;
        self.facet_cell_offsets = offsets;
        self.facet_cell_list = list;
        self.cell_facets = cell_facets;
        Ok(())
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn topo_dim(&self) -> usize {
        self.topo_dim
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.topo_dim + 1)
    }

    pub fn n_facets(&self) -> usize {
        self.facet_cell_offsets.len().saturating_sub(1)
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> [f64; 3] {
        self.vertices[v]
    }

    /// Vertex indices of cell `c`.
    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.topo_dim + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }

    pub fn cells_flat(&self) -> &[usize] {
        &self.cells
    }

    /// Sorted vertex indices of facet `f`.
    pub fn facet(&self, f: usize) -> &[usize] {
        let nf = self.topo_dim;
        &self.facets[f * nf..(f + 1) * nf]
    }

    /// Cells incident to facet `f` (one for boundary facets, two for interior
    /// facets, more at manifold branch points).
    pub fn facet_cells(&self, f: usize) -> &[usize] {
        &self.facet_cell_list[self.facet_cell_offsets[f]..self.facet_cell_offsets[f + 1]]
    }

    /// Facet of cell `c` opposite to its local vertex `local`.
    pub fn cell_facet(&self, c: usize, local: usize) -> usize {
        self.cell_facets[c * (self.topo_dim + 1) + local]
    }

    pub fn is_boundary_facet(&self, f: usize) -> bool {
        self.facet_cells(f).len() == 1
    }

    pub fn boundary_facets(&self) -> Vec<usize> {
        (0..self.n_facets()).filter(|&f| self.is_boundary_facet(f)).collect()
    }

    pub fn cell_centroid(&self, c: usize) -> [f64; 3] {
        centroid(self.cell(c).iter().map(|&v| self.vertices[v]))
    }

    pub fn facet_centroid(&self, f: usize) -> [f64; 3] {
        centroid(self.facet(f).iter().map(|&v| self.vertices[v]))
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Default periodic matching tolerance: 1e-9 of the largest box extent.
    pub fn default_periodic_tol(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        let extent = (0..self.embed_dim).map(|k| hi[k] - lo[k]).fold(0.0_f64, f64::max);
        1e-9 * extent.max(f64::MIN_POSITIVE)
    }

    pub fn geometry(&self) -> Result<GeometryTables, MeshError> {
        GeometryTables::new(self)
    }

    pub fn is_manifold(&self) -> bool {
        self.topo_dim < self.embed_dim
    }

    /// Mesh made of the listed cells, with unreferenced vertices dropped.
    /// Returns the new mesh and, for each of its vertices, the original index.
    pub fn submesh(&self, cells: &[usize]) -> Result<(Mesh, Vec<usize>), MeshError> {
        let mut new_index = vec![usize::MAX; self.n_vertices()];
        let mut old_index = Vec::new();
        let mut flat = Vec::with_capacity(cells.len() * (self.topo_dim + 1));
        for &c in cells {
            if c >= self.n_cells() {
                return Err(MeshError::InvalidArgument(format!("cell {c} out of range")));
            }
            for &v in self.cell(c) {
                if new_index[v] == usize::MAX {
                    new_index[v] = old_index.len();
                    old_index.push(v);
                }
                flat.push(new_index[v]);
            }
        }
        let vertices = old_index.iter().map(|&v| self.vertices[v]).collect();
        Ok((Mesh::new(self.embed_dim, self.topo_dim, vertices, flat)?, old_index))
    }
}

fn centroid(points: impl Iterator<Item = [f64; 3]>) -> [f64; 3] {
    let mut c = [0.0; 3];
    let mut n = 0usize;
    for p in points {
        for k in 0..3 {
            c[k] += p[k];
        }
        n += 1;
    }
    c.map(|x| x / n.max(1) as f64)
}

/// Per-cell compartment identifier (`partition marker`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CompartmentMarker(pub Vec<u32>);

impl CompartmentMarker {
    pub fn uniform(n_cells: usize, value: u32) -> Self {
        Self(vec![value; n_cells])
    }

    pub fn for_mesh(mesh: &Mesh, values: Vec<u32>) -> Result<Self, MeshError> {
        if values.len() != mesh.n_cells() {
            return Err(MeshError::Length(format!("marker has {} entries for {} cells", values.len(), mesh.n_cells())));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[u32] {
        &self.0
    }

    /// Distinct marker values in ascending order.
    pub fn distinct(&self) -> Vec<u32> {
        let mut v = self.0.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Element-wise 0/1 indicator of the two compartment groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseFunction(Vec<u8>);

impl PhaseFunction {
    pub fn new(values: Vec<u8>) -> Result<Self, MeshError> {
        if values.iter().any(|&p| p > 1) {
            return Err(MeshError::InvalidArgument("phase values must be 0 or 1".into()));
        }
        Ok(Self(values))
    }

    pub fn uniform(n_cells: usize) -> Self {
        Self(vec![0; n_cells])
    }

    pub fn values(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, cell: usize) -> u8 {
        self.0[cell]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True when both groups are present.
    pub fn is_two_phase(&self) -> bool {
        self.0.contains(&0) && self.0.contains(&1)
    }
}

/// Groups compartments by marker parity: odd markers form phase 1.
pub fn phase_from_marker(marker: &CompartmentMarker) -> PhaseFunction {
    PhaseFunction(marker.0.iter().map(|&m| (m % 2) as u8).collect())
}
