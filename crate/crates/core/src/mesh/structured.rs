use std::f64::consts::PI;

use super::{CompartmentMarker, Mesh, MeshError};

/// Structured interval, rectangle or box mesh between corners `p0` and `p1`.
///
/// The dimension is `n.len()`. Rectangles are split into two triangles
/// along the (0,0)-(1,1) diagonal and hexahedra into the six Kuhn
/// tetrahedra sharing the (0,0,0)-(1,1,1) diagonal, so opposite box faces
/// carry translated copies of the same facets.
pub fn build_structured_mesh(p0: &[f64], p1: &[f64], n: &[usize]) -> Result<Mesh, MeshError> {
    let dim = n.len();
    if !(1..=3).contains(&dim) || p0.len() != dim || p1.len() != dim {
        return Err(MeshError::InvalidArgument("corner and count lists must share a dimension in 1..=3".into()));
    }
    for k in 0..dim {
        if !(p1[k] > p0[k]) || !p0[k].is_finite() || !p1[k].is_finite() {
            return Err(MeshError::InvalidArgument(format!(
                "non-positive extent along axis {k}: [{}, {}]",
                p0[k], p1[k]
            )));
        }
        if n[k] == 0 {
            return Err(MeshError::InvalidArgument(format!("zero subdivisions along axis {k}")));
        }
    }

    let coord = |k: usize, i: usize| -> f64 {
        if i == n[k] {
            p1[k]
        } else {
            p0[k] + (p1[k] - p0[k]) * i as f64 / n[k] as f64
        }
    };

    match dim {
        1 => {
            let vertices = (0..=n[0]).map(|i| [coord(0, i), 0.0, 0.0]).collect();
            let cells = (0..n[0]).flat_map(|i| [i, i + 1]).collect();
            Mesh::new(1, 1, vertices, cells)
        }
        2 => {
            let (nx, ny) = (n[0], n[1]);
            let id = |i: usize, j: usize| i + (nx + 1) * j;
            let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
            for j in 0..=ny {
                for i in 0..=nx {
                    vertices.push([coord(0, i), coord(1, j), 0.0]);
                }
            }
            let mut cells = Vec::with_capacity(6 * nx * ny);
            for j in 0..ny {
                for i in 0..nx {
                    let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                    cells.extend_from_slice(&[v00, v10, v11, v00, v11, v01]);
                }
            }
            Mesh::new(2, 2, vertices, cells)
        }
        _ => {
            let (nx, ny, nz) = (n[0], n[1], n[2]);
            let id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
            let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
            for k in 0..=nz {
                for j in 0..=ny {
                    for i in 0..=nx {
                        vertices.push([coord(0, i), coord(1, j), coord(2, k)]);
                    }
                }
            }
            const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let mut cells = Vec::with_capacity(24 * nx * ny * nz);
            for k in 0..nz {
                for j in 0..ny {
                    for i in 0..nx {
                        for perm in PERMS {
                            let mut idx = [i, j, k];
                            cells.push(id(idx[0], idx[1], idx[2]));
                            for axis in perm {
                                idx[axis] += 1;
                                cells.push(id(idx[0], idx[1], idx[2]));
                            }
                        }
                    }
                }
            }
            Mesh::new(3, 3, vertices, cells)
        }
    }
}

/// Concentric layered disk centred at the origin.
///
/// `radii` are the outer radii of the layers in increasing order; cells of
/// layer `l` get marker `l`. Rings are spaced at most `h` apart radially and
/// carry roughly `2πr/h` vertices, so the circular interfaces are polygons
/// made of mesh edges.
pub fn build_layered_disk(radii: &[f64], h: f64) -> Result<(Mesh, CompartmentMarker), MeshError> {
    if radii.is_empty() || !(h > 0.0) {
        return Err(MeshError::InvalidArgument("layered disk needs at least one radius and a positive spacing".into()));
    }
    if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MeshError::InvalidArgument("layer radii must be positive and increasing".into()));
    }

    // (radius, layer of the band just inside this ring)
    let mut rings: Vec<(f64, u32)> = Vec::new();
    let mut inner = 0.0;
    for (layer, &r) in radii.iter().enumerate() {
        let m = ((r - inner) / h).ceil().max(1.0) as usize;
        for s in 1..=m {
            let rr = if s == m { r } else { inner + (r - inner) * s as f64 / m as f64 };
            rings.push((rr, layer as u32));
        }
        inner = r;
    }

    let mut vertices = vec![[0.0; 3]];
    let mut ring_start = Vec::new();
    let mut ring_len = Vec::new();
    for &(r, _) in &rings {
        let count = ((2.0 * PI * r / h).ceil() as usize).max(6);
        ring_start.push(vertices.len());
        ring_len.push(count);
        for k in 0..count {
            let a = 2.0 * PI * k as f64 / count as f64;
            vertices.push([r * a.cos(), r * a.sin(), 0.0]);
        }
    }

    let mut cells = Vec::new();
    let mut markers = Vec::new();
    let (s0, n0) = (ring_start[0], ring_len[0]);
    for k in 0..n0 {
        cells.extend_from_slice(&[0, s0 + k, s0 + (k + 1) % n0]);
        markers.push(rings[0].1);
    }
    for w in 1..rings.len() {
        let (sa, na) = (ring_start[w - 1], ring_len[w - 1]);
        let (sb, nb) = (ring_start[w], ring_len[w]);
        let layer = rings[w].1;
        // merge the two angularly sorted rings into a strip of triangles
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            let next_a = (i + 1) as f64 / na as f64;
            let next_b = (j + 1) as f64 / nb as f64;
            if j >= nb || (i < na && next_a <= next_b) {
                cells.extend_from_slice(&[sa + i % na, sb + j % nb, sa + (i + 1) % na]);
                i += 1;
            } else {
                cells.extend_from_slice(&[sa + i % na, sb + j % nb, sb + (j + 1) % nb]);
                j += 1;
            }
            markers.push(layer);
        }
    }

    let mesh = Mesh::new(2, 2, vertices, cells)?;
    Ok((mesh, CompartmentMarker(markers)))
}

/// 1D mesh of straight segments in 3D built from a graph of nodes and
/// edges; every edge is subdivided into pieces no longer than `h`.
///
/// Nodes shared by several edges become branch points.
pub fn build_graph_mesh(nodes: &[[f64; 3]], edges: &[(usize, usize)], h: f64) -> Result<Mesh, MeshError> {
    if !(h > 0.0) {
        return Err(MeshError::InvalidArgument("segment length must be positive".into()));
    }
    let mut vertices = nodes.to_vec();
    let mut cells = Vec::new();
    for &(a, b) in edges {
        if a >= nodes.len() || b >= nodes.len() || a == b {
            return Err(MeshError::InvalidArgument(format!("invalid edge ({a}, {b})")));
        }
        let (pa, pb) = (nodes[a], nodes[b]);
        let len = ((0..3).map(|k| (pb[k] - pa[k]).powi(2)).sum::<f64>()).sqrt();
        let m = (len / h).ceil().max(1.0) as usize;
        let mut prev = a;
        for s in 1..=m {
            let next = if s == m {
                b
            } else {
                let t = s as f64 / m as f64;
                vertices.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]), pa[2] + t * (pb[2] - pa[2])]);
                vertices.len() - 1
            };
            cells.extend_from_slice(&[prev, next]);
            prev = next;
        }
    }
    Mesh::new(3, 1, vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interval_counts() {
        let m = build_structured_mesh(&[0.0], &[10.0], &[10]).unwrap();
        assert_eq!(m.n_vertices(), 11);
        assert_eq!(m.n_cells(), 10);
        assert_relative_eq!(m.geometry().unwrap().total_measure(), 10.0, max_relative = 1e-14);
    }

    #[test]
    fn unit_cube_six_tets() {
        let m = build_structured_mesh(&[0.0; 3], &[1.0; 3], &[1, 1, 1]).unwrap();
        assert_eq!(m.n_vertices(), 8);
        assert_eq!(m.n_cells(), 6);
        assert_relative_eq!(m.geometry().unwrap().total_measure(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn box_volume() {
        let m = build_structured_mesh(&[0.0; 3], &[10.0; 3], &[10, 10, 10]).unwrap();
        assert_relative_eq!(m.geometry().unwrap().total_measure(), 1000.0, max_relative = 1e-12);
        // closed surface: boundary facets cover 6 faces of 100 squares, 2 triangles each
        assert_eq!(m.boundary_facets().len(), 6 * 100 * 2);
    }

    #[test]
    fn rectangle_area() {
        let m = build_structured_mesh(&[-5.0, -5.0], &[5.0, 5.0], &[7, 3]).unwrap();
        assert_eq!(m.n_cells(), 42);
        assert_relative_eq!(m.geometry().unwrap().total_measure(), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn invalid_arguments() {
        assert!(build_structured_mesh(&[1.0], &[1.0], &[3]).is_err());
        assert!(build_structured_mesh(&[0.0, 0.0], &[1.0, 1.0], &[3, 0]).is_err());
        assert!(build_structured_mesh(&[0.0], &[1.0, 1.0], &[3]).is_err());
    }

    #[test]
    fn layered_disk_areas_converge() {
        let (m, marker) = build_layered_disk(&[5.0, 7.5, 10.0], 0.5).unwrap();
        let geo = m.geometry().unwrap();
        let mut area = [0.0; 3];
        for c in 0..m.n_cells() {
            area[marker.0[c] as usize] += geo.cell_measure[c];
        }
        let exact = [PI * 25.0, PI * (7.5f64.powi(2) - 25.0), PI * (100.0 - 7.5f64.powi(2))];
        for l in 0..3 {
            assert_relative_eq!(area[l], exact[l], max_relative = 5e-3);
        }
        // the mesh is a topological disk: every interior edge has two cells
        assert!(m.boundary_facets().len() >= 6);
    }

    #[test]
    fn graph_mesh_lengths() {
        let nodes = [[0.0; 3], [3.0, 4.0, 0.0], [3.0, 4.0, 2.0]];
        let m = build_graph_mesh(&nodes, &[(0, 1), (1, 2)], 0.5).unwrap();
        assert_eq!(m.n_cells(), 10 + 4);
        assert_relative_eq!(m.geometry().unwrap().total_measure(), 7.0, max_relative = 1e-14);
    }
}
