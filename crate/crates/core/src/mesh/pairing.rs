use std::collections::HashMap;

use super::{Mesh, MeshError};

/// Correspondence between the boundary facets on the two opposite box faces
/// normal to `axis`.
///
/// Master facets lie on the lower face `x_axis = a`, slave facets on the
/// upper face `x_axis = b`, and `shift = b - a`. [`FacetPairing::inverse`]
/// swaps the roles.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetPairing {
    pub axis: usize,
    pub shift: f64,
    pub master_facets: Vec<usize>,
    /// `slave_facets[i]` is the partner of `master_facets[i]`.
    pub slave_facets: Vec<usize>,
    /// `(master vertex, slave vertex)`, sorted by master vertex.
    pub vertex_pairs: Vec<(usize, usize)>,
}

impl FacetPairing {
    pub fn len(&self) -> usize {
        self.master_facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.master_facets.is_empty()
    }

    pub fn shift_vector(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        s[self.axis] = self.shift;
        s
    }

    pub fn partner(&self, master_facet: usize) -> Option<usize> {
        self.master_facets.iter().position(|&f| f == master_facet).map(|i| self.slave_facets[i])
    }

    /// The same pairing with master and slave exchanged.
    pub fn inverse(&self) -> FacetPairing {
        let mut vertex_pairs: Vec<(usize, usize)> = self.vertex_pairs.iter().map(|&(m, s)| (s, m)).collect();
        vertex_pairs.sort_unstable();
        FacetPairing {
            axis: self.axis,
            shift: -self.shift,
            master_facets: self.slave_facets.clone(),
            slave_facets: self.master_facets.clone(),
            vertex_pairs,
        }
    }
}

/// Boundary facets lying in the plane `x_axis = level`.
pub(crate) fn face_facets(mesh: &Mesh, axis: usize, level: f64, tol: f64) -> Vec<usize> {
    mesh.boundary_facets()
        .into_iter()
        .filter(|&f| mesh.facet(f).iter().all(|&v| (mesh.vertex(v)[axis] - level).abs() <= tol))
        .collect()
}

/// Finds, for every facet on the lower face along `axis`, its translated
/// copy on the upper face. `tol` is an absolute coordinate tolerance (µm).
pub fn find_periodic_pairs(mesh: &Mesh, axis: usize, tol: f64) -> Result<FacetPairing, MeshError> {
    if axis >= mesh.embed_dim() || mesh.is_manifold() {
        return Err(MeshError::InvalidArgument(format!("axis {axis} is not a periodic direction of this mesh")));
    }
    let (lo, hi) = mesh.bounding_box();
    let shift = hi[axis] - lo[axis];
    let masters = face_facets(mesh, axis, lo[axis], tol);
    let slaves = face_facets(mesh, axis, hi[axis], tol);
    if masters.is_empty() || slaves.is_empty() {
        return Err(MeshError::InvalidArgument(format!("no boundary facets lie on the faces normal to axis {axis}")));
    }

    let collect_vertices = |facets: &[usize]| {
        let mut vs: Vec<usize> = facets.iter().flat_map(|&f| mesh.facet(f).to_vec()).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    };
    let master_vertices = collect_vertices(&masters);
    let slave_vertices = collect_vertices(&slaves);

    let locator = PointLocator::new(mesh, &slave_vertices, axis);
    let failure = |v: usize| {
        let f = masters.iter().chain(slaves.iter()).copied().find(|&f| mesh.facet(f).contains(&v)).unwrap_or(0);
        MeshError::PairingFailure { axis, centroid: mesh.facet_centroid(f) }
    };

    let mut vertex_map = HashMap::with_capacity(master_vertices.len());
    let mut vertex_pairs = Vec::with_capacity(master_vertices.len());
    for &v in &master_vertices {
        let mut target = mesh.vertex(v);
        target[axis] += shift;
        let w = locator.find(mesh, target, tol).ok_or_else(|| failure(v))?;
        vertex_map.insert(v, w);
        vertex_pairs.push((v, w));
    }
    let mut hit: Vec<usize> = vertex_pairs.iter().map(|p| p.1).collect();
    hit.sort_unstable();
    hit.dedup();
    if hit.len() != slave_vertices.len() || master_vertices.len() != slave_vertices.len() {
        let unmatched =
            slave_vertices.iter().copied().find(|v| hit.binary_search(v).is_err()).unwrap_or(slave_vertices[0]);
        return Err(failure(unmatched));
    }

    let slave_index: HashMap<Vec<usize>, usize> = slaves.iter().map(|&f| (mesh.facet(f).to_vec(), f)).collect();
    let mut slave_facets = Vec::with_capacity(masters.len());
    for &f in &masters {
        let mut key: Vec<usize> = mesh.facet(f).iter().map(|v| vertex_map[v]).collect();
        key.sort_unstable();
        let partner = slave_index
            .get(&key)
            .copied()
            .ok_or(MeshError::PairingFailure { axis, centroid: mesh.facet_centroid(f) })?;
        slave_facets.push(partner);
    }
    if masters.len() != slaves.len() {
        let mut paired = slave_facets.clone();
        paired.sort_unstable();
        let lonely = slaves.iter().copied().find(|f| paired.binary_search(f).is_err()).unwrap_or(slaves[0]);
        return Err(MeshError::PairingFailure { axis, centroid: mesh.facet_centroid(lonely) });
    }

    Ok(FacetPairing { axis, shift, master_facets: masters, slave_facets, vertex_pairs })
}

/// Sorted lookup of face vertices by their transverse coordinates.
pub(crate) struct PointLocator {
    /// (first transverse coordinate, vertex)
    sorted: Vec<(f64, usize)>,
    key_axis: usize,
}

impl PointLocator {
    pub(crate) fn new(mesh: &Mesh, vertices: &[usize], axis: usize) -> Self {
        let key_axis = if axis == 0 { 1 } else { 0 };
        let mut sorted: Vec<(f64, usize)> = vertices.iter().map(|&v| (mesh.vertex(v)[key_axis], v)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Self { sorted, key_axis }
    }

    pub(crate) fn find(&self, mesh: &Mesh, p: [f64; 3], tol: f64) -> Option<usize> {
        let key = p[self.key_axis];
        let start = self.sorted.partition_point(|e| e.0 < key - tol);
        self.sorted[start..].iter().take_while(|e| e.0 <= key + tol).map(|e| e.1).find(|&v| {
            let q = mesh.vertex(v);
            (0..3).all(|k| (q[k] - p[k]).abs() <= tol)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;
    use approx::assert_relative_eq;

    #[test]
    fn structured_box_pairs_every_face_facet() {
        let m = build_structured_mesh(&[0.0; 3], &[2.0, 3.0, 1.0], &[2, 3, 2]).unwrap();
        let geo = m.geometry().unwrap();
        for axis in 0..3 {
            let p = find_periodic_pairs(&m, axis, m.default_periodic_tol()).unwrap();
            assert_eq!(p.len(), [12, 8, 12][axis]);
            for (&a, &b) in p.master_facets.iter().zip(&p.slave_facets) {
                assert_relative_eq!(geo.facet_measure[a], geo.facet_measure[b], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        let m = build_structured_mesh(&[0.0, 0.0], &[1.0, 1.0], &[3, 4]).unwrap();
        let p = find_periodic_pairs(&m, 1, m.default_periodic_tol()).unwrap();
        let inv = p.inverse();
        for &f in &p.master_facets {
            let s = p.partner(f).unwrap();
            assert_eq!(inv.partner(s), Some(f));
        }
    }

    #[test]
    fn perturbed_vertex_fails() {
        let m = build_structured_mesh(&[0.0, 0.0], &[1.0, 1.0], &[3, 3]).unwrap();
        let mut verts = m.vertices().to_vec();
        // vertex (i=3, j=1) sits on the x = 1 face
        verts[3 + 4][1] += 1e-3;
        let bent = Mesh::new(2, 2, verts, m.cells_flat().to_vec()).unwrap();
        let err = find_periodic_pairs(&bent, 0, bent.default_periodic_tol()).unwrap_err();
        assert!(matches!(err, MeshError::PairingFailure { axis: 0, .. }));
    }
}
