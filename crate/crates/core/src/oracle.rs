//! Reference solutions used to validate the finite-element path.
//!
//! [`fd_reference_signal`] is a finite-difference solver on an interval
//! split into sub-intervals by permeable interfaces. Each sub-interval has
//! its own vertex-centred grid with nodes on both ends; the interface
//! condition enters through ghost values, which keeps the global system
//! tridiagonal. It uses nothing from the assembly, sparse or solver
//! modules.

use num_complex::Complex64;
use thiserror::Error;

use crate::assembly::DiffusionTensor;
use crate::sequences::{GradientSpec, SequenceError, Side, TemporalProfile, GAMMA};
use crate::stepper::SignalRecord;

/// Smallest accepted grid count.
pub const MIN_GRID: usize = 100;

/// Growth of `max |U|` beyond this factor is reported as an instability.
const GROWTH_LIMIT: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid oracle configuration: {0}")]
    Invalid(String),
    #[error("finite-difference solution grew beyond {GROWTH_LIMIT}x at step {step} (t = {time} µs)")]
    Unstable { step: usize, time: f64 },
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// Permeable membrane at `position` (µm) with permeability `kappa` (µm/µs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdInterface {
    pub position: f64,
    pub kappa: f64,
}

/// Finite-difference problem on `[start, end]`.
///
/// `diffusion`, `t2` and `initial` hold one value per sub-interval (one more
/// than the number of interfaces).
#[derive(Debug, Clone, PartialEq)]
pub struct FdConfig {
    pub start: f64,
    pub end: f64,
    /// Total number of grid cells over the interval.
    pub grid: usize,
    /// Nominal time step in µs.
    pub dt: f64,
    pub interfaces: Vec<FdInterface>,
    pub diffusion: Vec<f64>,
    pub t2: Vec<f64>,
    pub initial: Vec<f64>,
    pub profile: TemporalProfile,
    /// The x-component of the gradient direction is used.
    pub gradient: GradientSpec,
}

impl FdConfig {
    /// Homogeneous interval with unit initial magnetization and no relaxation.
    pub fn homogeneous(
        start: f64,
        end: f64,
        grid: usize,
        dt: f64,
        diffusion: f64,
        profile: TemporalProfile,
        gradient: GradientSpec,
    ) -> Self {
        Self {
            start,
            end,
            grid,
            dt,
            interfaces: Vec::new(),
            diffusion: vec![diffusion],
            t2: vec![f64::INFINITY],
            initial: vec![1.0],
            profile,
            gradient,
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |m: String| Err(OracleError::Invalid(m));
        if !(self.end > self.start) {
            return bad(format!("empty interval [{}, {}]", self.start, self.end));
        }
        if self.grid < MIN_GRID {
            return bad(format!("grid count {} below {MIN_GRID}", self.grid));
        }
        if !(self.dt > 0.0) {
            return bad(format!("time step must be positive, got {}", self.dt));
        }
        let pieces = self.interfaces.len() + 1;
        for (name, v) in [("diffusion", &self.diffusion), ("t2", &self.t2), ("initial", &self.initial)] {
            if v.len() != pieces {
                return bad(format!("{name} has {} entries for {pieces} sub-intervals", v.len()));
            }
        }
        if self.diffusion.iter().any(|d| !(*d > 0.0)) {
            return bad("diffusivities must be positive".into());
        }
        if self.t2.iter().any(|t| !(*t > 0.0)) {
            return bad("T2 values must be positive".into());
        }
        let mut prev = self.start;
        for i in &self.interfaces {
            if !(i.position > prev && i.position < self.end) {
                return bad(format!("interface at {} is not strictly inside and increasing", i.position));
            }
            if !(i.kappa >= 0.0) {
                return bad(format!("negative permeability {}", i.kappa));
            }
            prev = i.position;
        }
        Ok(())
    }
}

/// One sub-interval's grid.
struct Piece {
    first: usize,
    nodes: usize,
    h: f64,
    d: f64,
    t2: f64,
}

/// Tridiagonal operator `L` with `dU/dt = −L U`, stored by bands, plus the
/// node positions and the trapezoid weights.
struct Grid {
    x: Vec<f64>,
    w: Vec<f64>,
    lower: Vec<Complex64>,
    diag: Vec<Complex64>,
    upper: Vec<Complex64>,
}

fn build_grid(cfg: &FdConfig) -> (Grid, Vec<Piece>) {
    let len = cfg.end - cfg.start;
    let mut bounds = vec![cfg.start];
    bounds.extend(cfg.interfaces.iter().map(|i| i.position));
    bounds.push(cfg.end);
    let mut pieces = Vec::new();
    let mut first = 0;
    for p in 0..bounds.len() - 1 {
        let l = bounds[p + 1] - bounds[p];
        let cells = ((cfg.grid as f64 * l / len).round() as usize).max(2);
        pieces.push(Piece { first, nodes: cells + 1, h: l / cells as f64, d: cfg.diffusion[p], t2: cfg.t2[p] });
        first += cells + 1;
    }
    let n = first;
    let zero = Complex64::new(0.0, 0.0);
    let mut g =
        Grid { x: vec![0.0; n], w: vec![0.0; n], lower: vec![zero; n], diag: vec![zero; n], upper: vec![zero; n] };
    for (p, pc) in pieces.iter().enumerate() {
        let a = pc.d / (pc.h * pc.h);
        for j in 0..pc.nodes {
            let i = pc.first + j;
            g.x[i] = bounds[p] + j as f64 * pc.h;
            let end_node = j == 0 || j + 1 == pc.nodes;
            g.w[i] = if end_node { 0.5 * pc.h } else { pc.h };
            g.diag[i] += 1.0 / pc.t2;
            if j == 0 {
                // mirrored ghost value: zero flux before the interface term
                g.diag[i] += 2.0 * a;
                g.upper[i] -= 2.0 * a;
            } else if j + 1 == pc.nodes {
                g.diag[i] += 2.0 * a;
                g.lower[i] -= 2.0 * a;
            } else {
                g.diag[i] += 2.0 * a;
                g.lower[i] -= a;
                g.upper[i] -= a;
            }
        }
    }
    // interface exchange 2κ(U_other − U_self)/h on each side
    for (k, iface) in cfg.interfaces.iter().enumerate() {
        let (left, right) = (&pieces[k], &pieces[k + 1]);
        let il = left.first + left.nodes - 1;
        let ir = right.first;
        let cl = 2.0 * iface.kappa / left.h;
        let cr = 2.0 * iface.kappa / right.h;
        g.diag[il] += cl;
        g.upper[il] -= cl;
        g.diag[ir] += cr;
        g.lower[ir] -= cr;
    }
    (g, pieces)
}

/// Solves a tridiagonal system in place (no pivoting; the Crank-Nicolson
/// matrices here are diagonally dominant).
fn thomas(lower: &[Complex64], diag: &[Complex64], upper: &[Complex64], rhs: &mut [Complex64]) {
    let n = diag.len();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    let mut beta = diag[0];
    c[0] = upper[0] / beta;
    rhs[0] /= beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / beta;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= c[i] * next;
    }
}

/// Time levels: multiples of `dt` plus the waveform breakpoints.
fn fd_times(profile: &TemporalProfile, dt: f64) -> Vec<f64> {
    let end = profile.echo_time();
    let mut t: Vec<f64> = profile.breakpoints();
    let mut k = 1.0;
    while k * dt < end {
        t.push(k * dt);
        k += 1.0;
    }
    t.push(0.0);
    t.push(end);
    t.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(t.len());
    for v in t {
        if out.last().is_none_or(|&l| v - l > 1e-6 * dt) {
            out.push(v);
        } else if profile.breakpoints().contains(&v) {
            *out.last_mut().unwrap() = v;
        }
    }
    out
}

/// Crank-Nicolson finite-difference signal `S(T) = ∫ U(x, T) dx`.
pub fn fd_reference_signal(cfg: &FdConfig) -> Result<SignalRecord, OracleError> {
    cfg.validate()?;
    let (grid, pieces) = build_grid(cfg);
    let n = grid.x.len();
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    for (p, pc) in pieces.iter().enumerate() {
        for v in &mut u[pc.first..pc.first + pc.nodes] {
            *v = Complex64::new(cfg.initial[p], 0.0);
        }
    }
    let s0: Complex64 = u.iter().zip(&grid.w).map(|(v, w)| v * w).sum();
    let scale0 = u.iter().fold(0.0_f64, |m, v| m.max(v.norm())).max(1e-300);
    let gx = cfg.gradient.g * cfg.gradient.direction()[0];
    let times = fd_times(&cfg.profile, cfg.dt);
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    let mut diag_new = vec![Complex64::new(0.0, 0.0); n];
    let (mut lo, mut up) = (vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n]);
    for step in 1..times.len() {
        let (t0, t1) = (times[step - 1], times[step]);
        let k = t1 - t0;
        let f_old = cfg.profile.f_limit(t0, Side::After)?;
        let f_new = cfg.profile.f_limit(t1, Side::Before)?;
        for i in 0..n {
            let phase_old = Complex64::new(0.0, GAMMA * gx * f_old * grid.x[i]);
            let mut r = (Complex64::new(1.0 / k, 0.0) - 0.5 * (grid.diag[i] + phase_old)) * u[i];
            if i > 0 {
                r -= 0.5 * grid.lower[i] * u[i - 1];
            }
            if i + 1 < n {
                r -= 0.5 * grid.upper[i] * u[i + 1];
            }
            rhs[i] = r;
            let phase_new = Complex64::new(0.0, GAMMA * gx * f_new * grid.x[i]);
            diag_new[i] = Complex64::new(1.0 / k, 0.0) + 0.5 * (grid.diag[i] + phase_new);
            lo[i] = 0.5 * grid.lower[i];
            up[i] = 0.5 * grid.upper[i];
        }
        thomas(&lo, &diag_new, &up, &mut rhs);
        std::mem::swap(&mut u, &mut rhs);
        let peak = u.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        if !peak.is_finite() || peak > GROWTH_LIMIT * scale0 {
            return Err(OracleError::Unstable { step, time: t1 });
        }
    }
    let signal: Complex64 = u.iter().zip(&grid.w).map(|(v, w)| v * w).sum();
    Ok(SignalRecord {
        b: cfg.gradient.b_value(&cfg.profile),
        g: cfg.gradient.g,
        direction: cfg.gradient.direction(),
        signal,
        attenuation: if s0.norm() > 0.0 { signal.norm() / s0.norm() } else { 0.0 },
    })
}

/// Free-diffusion attenuation `exp(−b qᵀDq)` for a unit direction `q`.
pub fn analytic_free_signal(b: f64, d: &DiffusionTensor, q: [f64; 3]) -> f64 {
    let dq = d.apply(&q);
    (-b * (q[0] * dq[0] + q[1] * dq[1] + q[2] * dq[2])).exp()
}

/// Relaxation factor `exp(−T/T2)`.
pub fn analytic_t2_factor(echo_time: f64, t2: f64) -> f64 {
    (-echo_time / t2).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgse() -> TemporalProfile {
        TemporalProfile::pgse(10600.0, 43100.0).unwrap()
    }

    #[test]
    fn no_gradient_keeps_length() {
        let p = pgse();
        let g = GradientSpec::from_g([1.0, 0.0, 0.0], 0.0).unwrap();
        let mut cfg = FdConfig::homogeneous(0.0, 10.0, 100, 500.0, 3e-3, p, g);
        cfg.interfaces = vec![FdInterface { position: 4.0, kappa: 1e-5 }];
        cfg.diffusion = vec![3e-3, 1e-3];
        cfg.t2 = vec![f64::INFINITY; 2];
        cfg.initial = vec![1.0, 1.0];
        let r = fd_reference_signal(&cfg).unwrap();
        assert!((r.signal - Complex64::new(10.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn rejects_small_grid_and_bad_interfaces() {
        let g = GradientSpec::from_g([1.0, 0.0, 0.0], 0.0).unwrap();
        let cfg = FdConfig::homogeneous(0.0, 10.0, 50, 100.0, 3e-3, pgse(), g);
        assert!(matches!(fd_reference_signal(&cfg), Err(OracleError::Invalid(_))));
        let mut cfg = FdConfig::homogeneous(0.0, 10.0, 100, 100.0, 3e-3, pgse(), g);
        cfg.interfaces = vec![FdInterface { position: 10.0, kappa: 0.0 }];
        cfg.diffusion = vec![3e-3; 2];
        cfg.t2 = vec![f64::INFINITY; 2];
        cfg.initial = vec![1.0; 2];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn closed_forms() {
        let d = DiffusionTensor::Isotropic(3e-3);
        assert_eq!(analytic_free_signal(0.0, &d, [1.0, 0.0, 0.0]), 1.0);
        assert!((analytic_free_signal(1000.0, &d, [0.0, 1.0, 0.0]) - (-3.0_f64).exp()).abs() < 1e-15);
        assert_eq!(analytic_free_signal(1000.0, &DiffusionTensor::Isotropic(0.0), [1.0, 0.0, 0.0]), 1.0);
        assert_eq!(analytic_t2_factor(100.0, f64::INFINITY), 1.0);
        assert!((analytic_t2_factor(40.0, 40.0) - (-1.0_f64).exp()).abs() < 1e-15);
        assert!((analytic_t2_factor(53700.0, 40000.0) - (-1.3425_f64).exp()).abs() < 1e-15);
    }
}
