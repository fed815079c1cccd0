use super::{Mesh, MeshError};

/// Per-cell and per-facet geometric quantities of a mesh.
///
/// Basis gradients are those of the P1 (barycentric) functions, expressed
/// in embedding coordinates; on manifold meshes they are tangential.
#[derive(Debug, Clone)]
pub struct GeometryTables {
    pub cell_measure: Vec<f64>,
    pub cell_diameter: Vec<f64>,
    /// `cell_gradients[c][i]` is the gradient of the basis function of the
    /// i-th local vertex of cell `c`.
    pub cell_gradients: Vec<Vec<[f64; 3]>>,
    pub facet_measure: Vec<f64>,
    /// Unit normal of each facet, pointing out of its first incident cell.
    pub facet_normal: Vec<[f64; 3]>,
}

impl GeometryTables {
    pub fn new(mesh: &Mesh) -> Result<Self, MeshError> {
        let nc = mesh.n_cells();
        let mut cell_measure = Vec::with_capacity(nc);
        let mut cell_diameter = Vec::with_capacity(nc);
        let mut cell_gradients = Vec::with_capacity(nc);
        for c in 0..nc {
            let pts: Vec<[f64; 3]> = mesh.cell(c).iter().map(|&v| mesh.vertex(v)).collect();
            let (measure, grads) =
                barycentric_gradients(&pts).ok_or(MeshError::DegenerateCell { cell: c, measure: 0.0 })?;
            cell_measure.push(measure);
            cell_diameter.push(diameter(&pts));
            cell_gradients.push(grads);
        }

        let nf = mesh.n_facets();
        let mut facet_measure = Vec::with_capacity(nf);
        let mut facet_normal = Vec::with_capacity(nf);
        for f in 0..nf {
            let pts: Vec<[f64; 3]> = mesh.facet(f).iter().map(|&v| mesh.vertex(v)).collect();
            facet_measure.push(simplex_measure(&pts));
            let c = mesh.facet_cells(f)[0];
            facet_normal.push(outward_normal(mesh, &cell_gradients[c], c, f));
        }

        Ok(Self { cell_measure, cell_diameter, cell_gradients, facet_measure, facet_normal })
    }

    /// Unit normal of facet `f` pointing out of `cell`, which must be
    /// incident to `f`.
    pub fn outward_normal(&self, mesh: &Mesh, cell: usize, f: usize) -> [f64; 3] {
        outward_normal(mesh, &self.cell_gradients[cell], cell, f)
    }

    pub fn total_measure(&self) -> f64 {
        self.cell_measure.iter().sum()
    }
}

fn outward_normal(mesh: &Mesh, grads: &[[f64; 3]], cell: usize, f: usize) -> [f64; 3] {
    let local = (0..=mesh.topo_dim()).find(|&i| mesh.cell_facet(cell, i) == f).expect("facet is not incident to cell");
    // the opposite vertex's basis function grows into the cell
    let g = grads[local];
    let n = norm(&g);
    [-g[0] / n, -g[1] / n, -g[2] / n]
}

pub(crate) fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn diameter(pts: &[[f64; 3]]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max(norm(&sub(&pts[i], &pts[j])));
        }
    }
    d
}

/// Gram matrix `EᵀE` of the edge vectors from the first vertex.
fn gram(pts: &[[f64; 3]]) -> (Vec<[f64; 3]>, [[f64; 3]; 3], usize) {
    let d = pts.len() - 1;
    let edges: Vec<[f64; 3]> = (1..=d).map(|i| sub(&pts[i], &pts[0])).collect();
    let mut g = [[0.0; 3]; 3];
    for i in 0..d {
        for j in 0..d {
            g[i][j] = dot(&edges[i], &edges[j]);
        }
    }
    (edges, g, d)
}

fn det(g: &[[f64; 3]; 3], d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => g[0][0],
        2 => g[0][0] * g[1][1] - g[0][1] * g[1][0],
        _ => {
            g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
                + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0])
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).product::<usize>() as f64
}

/// Measure (length, area, volume) of a simplex given by its vertices; a
/// single point has measure one.
pub fn simplex_measure(pts: &[[f64; 3]]) -> f64 {
    let (_, g, d) = gram(pts);
    det(&g, d).max(0.0).sqrt() / factorial(d)
}

/// Measure and P1 basis gradients of a simplex, `None` if degenerate.
fn barycentric_gradients(pts: &[[f64; 3]]) -> Option<(f64, Vec<[f64; 3]>)> {
    let (edges, g, d) = gram(pts);
    let det_g = det(&g, d);
    if !(det_g > 0.0) {
        return None;
    }
    let inv = invert(&g, d, det_g);
    // grad λ_i = Σ_j (G⁻¹)_{ij} e_j for i = 1..d
    let mut grads = vec![[0.0; 3]; d + 1];
    for i in 0..d {
        let mut v = [0.0; 3];
        for j in 0..d {
            for k in 0..3 {
                v[k] += inv[i][j] * edges[j][k];
            }
        }
        grads[i + 1] = v;
        for k in 0..3 {
            grads[0][k] -= v[k];
        }
    }
    Some((det_g.sqrt() / factorial(d), grads))
}

fn invert(g: &[[f64; 3]; 3], d: usize, det_g: f64) -> [[f64; 3]; 3] {
    let mut inv = [[0.0; 3]; 3];
    match d {
        1 => inv[0][0] = 1.0 / g[0][0],
        2 => {
            inv[0][0] = g[1][1] / det_g;
            inv[0][1] = -g[0][1] / det_g;
            inv[1][0] = -g[1][0] / det_g;
            inv[1][1] = g[0][0] / det_g;
        }
        _ => {
            for i in 0..3 {
                for j in 0..3 {
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    inv[i][j] = (g[r0][c0] * g[r1][c1] - g[r0][c1] * g[r1][c0]) / det_g;
                }
            }
        }
    }
    inv
}
