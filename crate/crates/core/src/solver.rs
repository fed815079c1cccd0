//! Linear solvers for the complex (non-Hermitian) step systems.
//!
//! * [`gmres`]: restarted GMRES with right Jacobi preconditioning.
//! * [`BandedLu`]: LU with partial pivoting in band storage after a reverse
//!   Cuthill-McKee reordering; used for small and medium systems.

use std::collections::VecDeque;

use num_complex::Complex64;
use thiserror::Error;

use crate::sparse::{norm2, CsrMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("GMRES stopped after {iterations} iterations at relative residual {final_residual:e}")]
    NotConverged {
        iterations: usize,
        final_residual: f64,
        /// Relative residual after every iteration.
        history: Vec<f64>,
    },
    #[error("zero pivot in column {0}")]
    Singular(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Which linear solver to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    /// Direct below [`DIRECT_DOF_LIMIT`] dofs when the band fits in memory,
    /// GMRES otherwise.
    #[default]
    Auto,
    Direct,
    Iterative,
}

/// Largest system handled by the direct solver in `Auto` mode.
pub const DIRECT_DOF_LIMIT: usize = 50_000;

/// Band storage budget for the direct solver in `Auto` mode (entries).
const DIRECT_BAND_LIMIT: usize = 16_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative residual `‖Ax − b‖ / ‖b‖` to reach.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    pub choice: SolverChoice,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 5000, restart: 60, choice: SolverChoice::Auto }
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn check_square(a: &CsrMatrix, b: &[Complex64]) -> Result<(), SolverError> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(SolverError::Dimension(format!(
            "{}x{} matrix with right-hand side of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    Ok(())
}

/// `‖b − Ax‖ / ‖b‖` (`‖b − Ax‖` when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let nb = norm2(b);
    norm2(&r) / if nb > 0.0 { nb } else { 1.0 }
}

/// Restarted GMRES(m) with right Jacobi preconditioning.
pub fn gmres(
    a: &CsrMatrix,
    b: &[Complex64],
    x0: Option<&[Complex64]>,
    opts: &SolveOptions,
) -> Result<Vec<Complex64>, SolverError> {
    check_square(a, b)?;
    let n = b.len();
    let nb = norm2(b);
    if nb == 0.0 {
        return Ok(vec![zero(); n]);
    }
    let inv_diag: Vec<Complex64> =
        a.diagonal().into_iter().map(|d| if d.norm() > 0.0 { d.inv() } else { Complex64::new(1.0, 0.0) }).collect();
    let m = opts.restart.max(1).min(n.max(1));
    let mut x = x0.map_or_else(|| vec![zero(); n], <[Complex64]>::to_vec);
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        let ax = a.mul_vec(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm2(&r);
        let rel = beta / nb;
        if rel <= opts.tol {
            return Ok(x);
        }
        if iterations >= opts.max_iter || !rel.is_finite() {
            return Err(SolverError::NotConverged { iterations, final_residual: rel, history });
        }
        let mut v: Vec<Vec<Complex64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut h = vec![vec![zero(); m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![zero(); m];
        let mut g = vec![zero(); m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for j in 0..m {
            let z: Vec<Complex64> = v[j].iter().zip(&inv_diag).map(|(p, d)| p * d).collect();
            let mut w = a.mul_vec(&z);
            for i in 0..=j {
                let hij: Complex64 = v[i].iter().zip(&w).map(|(p, q)| p.conj() * q).sum();
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= hij * vk;
                }
            }
            let hn = norm2(&w);
            h[j + 1][j] = Complex64::new(hn, 0.0);
            for i in 0..j {
                let (p, q) = (h[i][j], h[i + 1][j]);
                h[i][j] = cs[i] * p + sn[i] * q;
                h[i + 1][j] = -sn[i].conj() * p + cs[i] * q;
            }
            let (p, q) = (h[j][j], h[j + 1][j]);
            let r = (p.norm_sqr() + q.norm_sqr()).sqrt();
            if r == 0.0 {
                cs[j] = 1.0;
                sn[j] = zero();
            } else if p.norm() == 0.0 {
                cs[j] = 0.0;
                sn[j] = q.conj() / r;
            } else {
                cs[j] = p.norm() / r;
                sn[j] = (p / p.norm()) * q.conj() / r;
            }
            h[j][j] = cs[j] * p + sn[j] * q;
            h[j + 1][j] = zero();
            g[j + 1] = -sn[j].conj() * g[j];
            g[j] *= cs[j];
            iterations += 1;
            k_used = j + 1;
            let est = g[j + 1].norm() / nb;
            history.push(est);
            if est <= opts.tol * 0.5 || hn == 0.0 || iterations >= opts.max_iter {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        // back substitution for the Krylov coefficients
        let mut y = vec![zero(); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in i + 1..k_used {
                s -= h[i][l] * y[l];
            }
            y[i] = if h[i][i].norm() > 0.0 { s / h[i][i] } else { zero() };
        }
        for (l, yl) in y.iter().enumerate() {
            for ((xi, vi), d) in x.iter_mut().zip(&v[l]).zip(&inv_diag) {
                *xi += yl * vi * d;
            }
        }
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrized pattern; `perm[new] = old`.
pub fn rcm_ordering(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // (last node of the deepest level with minimal degree, depth)
        let mut seen = visited.to_vec();
        let mut frontier = vec![start];
        seen[start] = true;
        let mut depth = 0;
        loop {
            let mut next = Vec::new();
            for &u in &frontier {
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                let best = *frontier.iter().min_by_key(|&&u| (deg[u], u)).unwrap();
                return (best, depth);
            }
            frontier = next;
            depth += 1;
        }
    };

    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&u| (deg[u], u));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start
        let mut start = seed;
        let (mut far, mut depth) = bfs_levels(start, &visited);
        for _ in 0..4 {
            let (f2, d2) = bfs_levels(far, &visited);
            if d2 <= depth {
                break;
            }
            start = far;
            far = f2;
            depth = d2;
        }
        let _ = start;
        let root = far;
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = adj[u].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (deg[w], w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Lower and upper bandwidth of `a` under the ordering `perm[new] = old`.
pub fn bandwidth(a: &CsrMatrix, perm: &[usize]) -> (usize, usize) {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let (mut kl, mut ku) = (0, 0);
    for i in 0..a.nrows() {
        for &j in a.row(i).0 {
            let (pi, pj) = (inv[i], inv[j]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }
    }
    (kl, ku)
}

/// LU factorization with partial pivoting of a band matrix, stored column
/// by column with `2·kl + ku + 1` rows (fill-in from pivoting included).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<Complex64>,
    ipiv: Vec<usize>,
    perm: Vec<usize>,
}

impl BandedLu {
    /// Band storage entries needed to factor `a` after reordering.
    pub fn storage_estimate(a: &CsrMatrix, perm: &[usize]) -> usize {
        let (kl, ku) = bandwidth(a, perm);
        a.nrows() * (2 * kl + ku + 1)
    }

    pub fn factor(a: &CsrMatrix) -> Result<Self, SolverError> {
        let perm = rcm_ordering(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self, SolverError> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(SolverError::Dimension("band factorization needs a square matrix".into()));
        }
        let (kl, ku) = bandwidth(a, &perm);
        let kv = kl + ku;
        let ld = 2 * kl + ku + 1;
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut ab = vec![zero(); n * ld];
        let at = |i: usize, j: usize| j * ld + kv + i - j;
        for old_i in 0..n {
            let i = inv[old_i];
            let (cols, vals) = a.row(old_i);
            for (&old_j, &v) in cols.iter().zip(vals) {
                let j = inv[old_j];
                ab[at(i, j)] += v;
            }
        }

        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ld;
            let mut jp = 0;
            let mut best = -1.0;
            for p in 0..=km {
                let v = ab[col + kv + p];
                let s = v.re.abs() + v.im.abs();
                if s > best {
                    best = s;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            if ab[col + kv + jp] == zero() {
                return Err(SolverError::Singular(j));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let t = c - j;
                    ab.swap(c * ld + kv + jp - t, c * ld + kv - t);
                }
            }
            if km > 0 {
                let piv = ab[col + kv].inv();
                for p in 1..=km {
                    ab[col + kv + p] *= piv;
                }
                for c in j + 1..=ju {
                    let t = c - j;
                    let u = ab[c * ld + kv - t];
                    if u != zero() {
                        for p in 1..=km {
                            let l = ab[col + kv + p];
                            ab[c * ld + kv + p - t] -= l * u;
                        }
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, ab, ipiv, perm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n, "right-hand side length mismatch");
        let (n, kl, kv) = (self.n, self.kl, self.kl + self.ku);
        let ld = 2 * kl + self.ku + 1;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..n {
            let l = self.ipiv[j];
            if l != j {
                x.swap(l, j);
            }
            let xj = x[j];
            for p in 1..=kl.min(n - 1 - j) {
                x[j + p] -= self.ab[j * ld + kv + p] * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.ab[j * ld + kv];
            let xj = x[j];
            for i in j.saturating_sub(kv)..j {
                x[i] -= self.ab[j * ld + kv + i - j] * xj;
            }
        }
        let mut out = vec![zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

/// True when the direct solver is used for `a` under `choice`.
pub fn use_direct(a: &CsrMatrix, choice: SolverChoice) -> bool {
    match choice {
        SolverChoice::Direct => true,
        SolverChoice::Iterative => false,
        SolverChoice::Auto => {
            a.nrows() < DIRECT_DOF_LIMIT && BandedLu::storage_estimate(a, &rcm_ordering(a)) <= DIRECT_BAND_LIMIT
        }
    }
}

/// Direct solve with up to three refinement sweeps; falls back to GMRES
/// from the direct solution when the tolerance is still not met.
pub fn solve_with_factor(
    lu: &BandedLu,
    a: &CsrMatrix,
    b: &[Complex64],
    opts: &SolveOptions,
) -> Result<Vec<Complex64>, SolverError> {
    check_square(a, b)?;
    let mut x = lu.solve(b);
    for _ in 0..3 {
        let ax = a.mul_vec(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let nb = norm2(b);
        if norm2(&r) <= opts.tol * if nb > 0.0 { nb } else { 1.0 } {
            return Ok(x);
        }
        let dx = lu.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    if relative_residual(a, &x, b) <= opts.tol {
        return Ok(x);
    }
    gmres(a, b, Some(&x), opts)
}

/// Solves `A x = b` to the requested relative residual.
pub fn solve_linear(a: &CsrMatrix, b: &[Complex64], opts: &SolveOptions) -> Result<Vec<Complex64>, SolverError> {
    check_square(a, b)?;
    if use_direct(a, opts.choice) {
        let lu = BandedLu::factor(a)?;
        solve_with_factor(&lu, a, b, opts)
    } else {
        gmres(a, b, None, opts)
    }
}
