use super::{GeometryTables, Mesh, PhaseFunction};

/// Interior facets separating phase-0 and phase-1 cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterfaceFacetSet {
    pub facets: Vec<usize>,
    /// `(phase-0 cell, phase-1 cell)` for each facet.
    pub cells: Vec<(usize, usize)>,
    /// Unit normal pointing from the phase-0 cell into the phase-1 cell.
    pub normals: Vec<[f64; 3]>,
}

impl InterfaceFacetSet {
    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }
}

/// Collects the facets where the phase changes, with normals oriented
/// from phase 0 to phase 1.
///
/// Branch points of manifold meshes (facets with more than two cells) are
/// not interfaces.
pub fn interface_facets(mesh: &Mesh, geo: &GeometryTables, phase: &PhaseFunction) -> InterfaceFacetSet {
    let mut set = InterfaceFacetSet::default();
    for f in 0..mesh.n_facets() {
        let cells = mesh.facet_cells(f);
        if cells.len() != 2 {
            continue;
        }
        let (a, b) = (cells[0], cells[1]);
        let (pa, pb) = (phase.get(a), phase.get(b));
        if pa == pb {
            continue;
        }
        let (c0, c1) = if pa == 0 { (a, b) } else { (b, a) };
        set.facets.push(f);
        set.cells.push((c0, c1));
        set.normals.push(geo.outward_normal(mesh, c0, f));
    }
    set
}
