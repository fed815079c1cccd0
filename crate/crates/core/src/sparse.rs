//! Compressed sparse row storage for complex matrices.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

/// Rows per parallel work item in matrix-vector products.
const ROW_CHUNK: usize = 2048;

/// Square or rectangular complex matrix in CSR form. Column indices are
/// strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are
    /// summed in input order, so the result is deterministic for a given
    /// triplet sequence.
    ///
    /// # Panics
    /// Panics if an index is out of range.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        for &(r, c, _) in &triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
        }
        triplets.par_sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    /// Same as [`CsrMatrix::from_triplets`] for real entries.
    pub fn from_real_triplets(nrows: usize, ncols: usize, triplets: Vec<(usize, usize, f64)>) -> Self {
        Self::from_triplets(
            nrows,
            ncols,
            triplets.into_iter().map(|(r, c, v)| (r, c, Complex64::new(v, 0.0))).collect(),
        )
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    pub fn diagonal_matrix(d: &[Complex64]) -> Self {
        let n = d.len();
        Self { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: d.to_vec() }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[Complex64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(Complex64::new(0.0, 0.0), |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn mul_vec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols, "vector length mismatch");
        assert_eq!(y.len(), self.nrows, "output length mismatch");
        let kernel = |(chunk, ys): (usize, &mut [Complex64])| {
            for (k, yi) in ys.iter_mut().enumerate() {
                let i = chunk * ROW_CHUNK + k;
                let mut s = Complex64::new(0.0, 0.0);
                for p in self.indptr[i]..self.indptr[i + 1] {
                    s += self.values[p] * x[self.indices[p]];
                }
                *yi = s;
            }
        };
        if self.nrows > ROW_CHUNK {
            y.par_chunks_mut(ROW_CHUNK).enumerate().for_each(kernel);
        } else {
            y.chunks_mut(ROW_CHUNK).enumerate().for_each(kernel);
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A y` without conjugation.
    pub fn bilinear(&self, x: &[Complex64], y: &[Complex64]) -> Complex64 {
        dotu(x, &self.mul_vec(y))
    }

    pub fn scaled(&self, a: Complex64) -> Self {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= a);
        m
    }

    pub fn transpose(&self) -> Self {
        let mut trips = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                trips.push((j, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, trips)
    }

    /// Largest `|A_ij - A_ji|` (plain transpose, no conjugation).
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).norm());
            }
        }
        worst
    }

    /// True when `A = Aᵀ` up to `tol · max|A_ij|`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.symmetry_defect() <= tol * self.max_abs()
    }

    /// True when every stored `(i, j)` has a stored `(j, i)`.
    pub fn has_symmetric_pattern(&self) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|i| self.row(i).0.iter().all(|&j| self.row(j).0.binary_search(&i).is_ok()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `Σ_k c_k A_k` on the union sparsity pattern.
    pub fn linear_combination(terms: &[(Complex64, &CsrMatrix)]) -> CsrMatrix {
        let combiner = Combiner::new(&terms.iter().map(|t| t.1).collect::<Vec<_>>());
        let coeffs: Vec<Complex64> = terms.iter().map(|t| t.0).collect();
        combiner.combine(&coeffs)
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut d = vec![vec![Complex64::new(0.0, 0.0); self.ncols]; self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[i][j] = v;
            }
        }
        d
    }

    /// Writes the matrix in Matrix Market coordinate complex general format.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:e} {:e}", i + 1, j + 1, v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Precomputed union pattern for repeatedly forming linear combinations of
/// a fixed set of matrices with changing coefficients.
#[derive(Debug, Clone)]
pub struct Combiner {
    pattern: CsrMatrix,
    /// For each term, the union position of each of its stored entries.
    maps: Vec<Vec<usize>>,
    terms: Vec<Vec<Complex64>>,
}

impl Combiner {
    /// # Panics
    /// Panics if the matrices differ in shape or the list is empty.
    pub fn new(mats: &[&CsrMatrix]) -> Self {
        assert!(!mats.is_empty(), "no matrices to combine");
        let (nr, nc) = (mats[0].nrows, mats[0].ncols);
        for m in mats {
            assert!(m.nrows == nr && m.ncols == nc, "shape mismatch in linear combination");
        }
        let mut indptr = vec![0usize; nr + 1];
        let mut indices = Vec::new();
        let mut row_cols: Vec<usize> = Vec::new();
        for i in 0..nr {
            row_cols.clear();
            for m in mats {
                row_cols.extend_from_slice(m.row(i).0);
            }
            row_cols.sort_unstable();
            row_cols.dedup();
            indices.extend_from_slice(&row_cols);
            indptr[i + 1] = indices.len();
        }
        let maps = mats
            .iter()
            .map(|m| {
                let mut map = Vec::with_capacity(m.nnz());
                for i in 0..nr {
                    let union = &indices[indptr[i]..indptr[i + 1]];
                    for j in m.row(i).0 {
                        map.push(indptr[i] + union.binary_search(j).unwrap());
                    }
                }
                map
            })
            .collect();
        let values = vec![Complex64::new(0.0, 0.0); indices.len()];
        Self {
            pattern: CsrMatrix { nrows: nr, ncols: nc, indptr, indices, values },
            maps,
            terms: mats.iter().map(|m| m.values.clone()).collect(),
        }
    }

    /// `Σ_k coeffs[k] A_k`; zero coefficients are skipped but the pattern is
    /// always the union pattern.
    pub fn combine(&self, coeffs: &[Complex64]) -> CsrMatrix {
        assert_eq!(coeffs.len(), self.maps.len(), "coefficient count mismatch");
        let mut out = self.pattern.clone();
        for ((map, vals), &c) in self.maps.iter().zip(&self.terms).zip(coeffs) {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (&p, &v) in map.iter().zip(vals) {
                out.values[p] += c * v;
            }
        }
        out
    }
}

/// Unconjugated dot product.
pub(crate) fn dotu(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
