//! Theta-method time integration.
//!
//! Every step matrix is a scalar-weighted combination of the constituents
//! in [`FemSystem`]; only `f(t)` (untransformed formulation) or `F(t)`
//! (transformed formulation) and the step length change between steps.
//! Factorizations are cached on those scalars, so piecewise-constant
//! waveforms factor a handful of matrices per run.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::assembly::{cell_values_to_dofs, Domain, FemSystem, LayoutMode, Media};
use crate::error::{Error, Result};
use crate::mesh::{GeometryTables, Mesh, PhaseFunction};
use crate::periodic::{build_strong_constraint, build_weak_periodic, PeriodicConstraint, WeakPeriodicData};
use crate::sequences::{GradientSpec, Side, TemporalProfile, GAMMA};
use crate::solver::{gmres, solve_with_factor, use_direct, BandedLu, SolveOptions, SolverError};
use crate::sparse::{Combiner, CsrMatrix};

pub use crate::solver::SolverChoice;

/// Steps closer than this fraction of `Δt` to a waveform breakpoint are
/// merged into it.
const MERGE_FRACTION: f64 = 1e-6;

/// Factorizations kept per run before the cache is flushed.
const CACHE_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub theta: f64,
    /// Nominal step length in µs.
    pub dt: f64,
    /// Relative residual of each linear solve.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    pub solver: SolverChoice,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self { theta: 0.5, dt: 200.0, tol: 1e-12, max_iter: 5000, restart: 60, solver: SolverChoice::Auto }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("solver tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol: self.tol, max_iter: self.max_iter, restart: self.restart, choice: self.solver }
    }
}

/// Outer boundary treatment. Periodic variants apply to the axes listed in
/// [`Simulation::periodic_axes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryCondition {
    /// Reflecting (zero flux).
    #[default]
    Neumann,
    /// Dof identification; requires the transformed formulation.
    PeriodicStrong,
    /// Artificial-permeability coupling of opposite faces; requires the
    /// untransformed formulation.
    PeriodicWeak,
}

/// Which unknown is marched in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// The magnetization `U` itself, with the position term `iγ f g·x U`.
    Untransformed,
    /// `u = U e^{iγF(t) g·x}`, which is periodic on periodic domains.
    Transformed,
}

/// Magnetization coefficients at a time level.
#[derive(Debug, Clone, PartialEq)]
pub struct MagState {
    pub values: Vec<Complex64>,
    /// Time in µs.
    pub time: f64,
    pub step: usize,
}

/// Signal for one gradient setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalRecord {
    /// b-value in s/mm².
    pub b: f64,
    /// Gradient amplitude in T/µm.
    pub g: f64,
    pub direction: [f64; 3],
    pub signal: Complex64,
    /// `|S| / |S₀|` with `S₀` the signal of the initial magnetization.
    pub attenuation: f64,
}

/// `S = 1ᵀ M u`: the exact integral of a P1 field (summed over fields).
pub fn compute_signal(mass: &CsrMatrix, u: &[Complex64]) -> Complex64 {
    mass.mul_vec(u).into_iter().sum()
}

/// Time levels `0 = t₀ < … < t_N = T`: multiples of `dt` merged with the
/// waveform breakpoints, so that `f` is smooth within every step.
pub fn time_grid(profile: &TemporalProfile, dt: f64) -> Vec<f64> {
    let end = profile.echo_time();
    let eps = MERGE_FRACTION * dt;
    let mut pts: Vec<(f64, bool)> = profile.breakpoints().into_iter().map(|t| (t, true)).collect();
    let mut k = 1usize;
    while (k as f64) * dt < end - eps {
        pts.push((k as f64 * dt, false));
        k += 1;
    }
    pts.push((0.0, true));
    pts.push((end, true));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut out: Vec<(f64, bool)> = Vec::with_capacity(pts.len());
    for p in pts {
        match out.last_mut() {
            Some(last) if p.0 - last.0 <= eps => {
                if p.1 && !last.1 {
                    *last = p;
                }
            }
            _ => out.push(p),
        }
    }
    out.into_iter().map(|p| p.0).collect()
}

/// Constituent matrices of one gradient direction, reduced to the
/// periodic quotient space on the strong path, with a shared sparsity
/// pattern for fast recombination.
#[derive(Debug, Clone)]
pub struct StepOperators {
    formulation: Formulation,
    mats: Vec<CsrMatrix>,
    combiner: Combiner,
    has_weak: bool,
    weak: Option<WeakPeriodicData>,
    direction: [f64; 3],
}

// constituent order inside `StepOperators::mats`
const M: usize = 0;
const S: usize = 1;
const R: usize = 2;
const I: usize = 3;
const J: usize = 4;
const C: usize = 4;
const Q: usize = 5;
const K1: usize = 6;
const K2: usize = 7;
const B: usize = 8;

impl StepOperators {
    pub fn new(
        sys: &FemSystem,
        formulation: Formulation,
        constraint: Option<&PeriodicConstraint>,
        weak: Option<WeakPeriodicData>,
    ) -> Result<Self> {
        let mut mats: Vec<&CsrMatrix> = vec![&sys.mass, &sys.stiffness, &sys.relaxation, &sys.jump_penalty];
        match formulation {
            Formulation::Untransformed => mats.push(&sys.position),
            Formulation::Transformed => {
                let t = sys.transformed.as_ref().ok_or_else(|| {
                    Error::Config("transformed formulation requested but its matrices were not assembled".into())
                })?;
                mats.extend([&t.convection, &t.quadratic, &t.jump, &t.average, &t.boundary]);
            }
        }
        if weak.is_some() && formulation == Formulation::Transformed {
            return Err(Error::Config("weak periodic coupling needs the untransformed formulation".into()));
        }
        if constraint.is_some() && formulation == Formulation::Untransformed {
            return Err(Error::Config("strong periodic constraint needs the transformed formulation".into()));
        }
        let own = weak.as_ref().map(|w| w.own_matrix(sys.n_dofs()));
        if let Some(o) = own.as_ref() {
            mats.push(o);
        }
        let mats: Vec<CsrMatrix> = match constraint {
            Some(pc) => mats.iter().map(|m| pc.reduce_matrix(m)).collect::<Result<_, _>>()?,
            None => mats.into_iter().cloned().collect(),
        };
        let refs: Vec<&CsrMatrix> = mats.iter().collect();
        let combiner = Combiner::new(&refs);
        Ok(Self { formulation, has_weak: own.is_some(), combiner, mats, weak, direction: sys.direction })
    }

    pub fn n(&self) -> usize {
        self.mats[M].nrows()
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mats[M]
    }

    /// Coefficients of the spatial operator `L(t)` for gradient amplitude `g`
    /// (mass slot zero). `side` selects the one-sided limit of `f`.
    fn operator_coefficients(&self, profile: &TemporalProfile, g: f64, t: f64, side: Side) -> Result<Vec<Complex64>> {
        let mut c = vec![Complex64::new(0.0, 0.0); self.mats.len()];
        c[S] = Complex64::new(1.0, 0.0);
        c[R] = Complex64::new(1.0, 0.0);
        c[I] = Complex64::new(1.0, 0.0);
        match self.formulation {
            Formulation::Untransformed => {
                c[J] = Complex64::new(0.0, GAMMA * g * profile.f_limit(t, side)?);
            }
            Formulation::Transformed => {
                let a = GAMMA * g * profile.F(t)?;
                c[C] = Complex64::new(0.0, a);
                c[Q] = Complex64::new(a * a, 0.0);
                c[K1] = Complex64::new(0.0, -0.5 * a);
                c[K2] = Complex64::new(0.0, -2.0 * a);
                c[B] = Complex64::new(0.0, -a);
            }
        }
        Ok(c)
    }

    /// Time-dependent scalar the step matrix depends on (besides `k`).
    fn key_scalar(&self, profile: &TemporalProfile, t: f64) -> Result<f64> {
        Ok(match self.formulation {
            Formulation::Untransformed => profile.f_limit(t, Side::Before)?,
            Formulation::Transformed => profile.F(t)?,
        })
    }

    /// Step matrix `A = M/k + θ L(tⁿ)` and explicit operator
    /// `E = M/k − (1 − θ) L(tⁿ⁻¹)`; the right-hand side is `E uⁿ⁻¹` plus
    /// the weak periodic cross terms.
    pub fn step_matrices(
        &self,
        cfg: &StepperConfig,
        profile: &TemporalProfile,
        g: f64,
        t_prev: f64,
        t_next: f64,
    ) -> Result<(CsrMatrix, CsrMatrix)> {
        Ok((self.implicit(cfg, profile, g, t_prev, t_next)?, self.explicit(cfg, profile, g, t_prev, t_next)?))
    }

    fn implicit(
        &self,
        cfg: &StepperConfig,
        profile: &TemporalProfile,
        g: f64,
        t_prev: f64,
        t_next: f64,
    ) -> Result<CsrMatrix> {
        let k = t_next - t_prev;
        let mut c = self.operator_coefficients(profile, g, t_next, Side::Before)?;
        for v in c.iter_mut() {
            *v *= cfg.theta;
        }
        c[M] = Complex64::new(1.0 / k, 0.0);
        if self.has_weak {
            *c.last_mut().unwrap() = Complex64::new(cfg.theta, 0.0);
        }
        Ok(self.combiner.combine(&c))
    }

    fn explicit(
        &self,
        cfg: &StepperConfig,
        profile: &TemporalProfile,
        g: f64,
        t_prev: f64,
        t_next: f64,
    ) -> Result<CsrMatrix> {
        let k = t_next - t_prev;
        let mut c = self.operator_coefficients(profile, g, t_prev, Side::After)?;
        for v in c.iter_mut() {
            *v *= -(1.0 - cfg.theta);
        }
        c[M] = Complex64::new(1.0 / k, 0.0);
        if self.has_weak {
            *c.last_mut().unwrap() = Complex64::new(0.0, 0.0);
        }
        Ok(self.combiner.combine(&c))
    }

    /// Right-hand side `E uⁿ⁻¹ (+ (1 − θ) κᵉ Σ e^{±iθ} X uⁿ⁻¹)`.
    pub fn rhs(
        &self,
        explicit: &CsrMatrix,
        cfg: &StepperConfig,
        profile: &TemporalProfile,
        g: f64,
        t_next: f64,
        u_prev: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        let mut r = explicit.mul_vec(u_prev);
        if let Some(w) = &self.weak {
            let gv = self.direction.map(|x| x * g);
            let cross = w.cross_term(&gv, profile.F(t_next)?, u_prev);
            for (ri, ci) in r.iter_mut().zip(cross) {
                *ri += ci * (1.0 - cfg.theta);
            }
        }
        Ok(r)
    }
}

/// Step matrix and right-hand side for one step `t_prev → t_next`.
pub fn form_step_system(
    ops: &StepOperators,
    cfg: &StepperConfig,
    profile: &TemporalProfile,
    g: f64,
    t_prev: f64,
    t_next: f64,
    u_prev: &[Complex64],
) -> Result<(CsrMatrix, Vec<Complex64>)> {
    let (a, e) = ops.step_matrices(cfg, profile, g, t_prev, t_next)?;
    let rhs = ops.rhs(&e, cfg, profile, g, t_next, u_prev)?;
    Ok((a, rhs))
}

fn all_finite(v: &[Complex64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

struct CachedSystem {
    matrix: CsrMatrix,
    lu: Option<BandedLu>,
}

/// Marches `u0` from 0 to the echo time for gradient amplitude `g` and
/// returns the final state. `observer` sees every step matrix.
pub fn march(
    ops: &StepOperators,
    cfg: &StepperConfig,
    profile: &TemporalProfile,
    g: f64,
    u0: Vec<Complex64>,
    mut observer: impl FnMut(&MagState, &CsrMatrix),
) -> Result<MagState> {
    cfg.validate()?;
    let times = time_grid(profile, cfg.dt);
    let opts = cfg.solve_options();
    let mut cache: HashMap<(u64, u64), CachedSystem> = HashMap::new();
    let mut state = MagState { values: u0, time: 0.0, step: 0 };
    for n in 1..times.len() {
        let (t0, t1) = (times[n - 1], times[n]);
        let key = ((t1 - t0).to_bits(), ops.key_scalar(profile, t1)?.to_bits());
        if !cache.contains_key(&key) {
            if cache.len() >= CACHE_LIMIT {
                cache.clear();
            }
            let matrix = ops.implicit(cfg, profile, g, t0, t1)?;
            let lu = if use_direct(&matrix, cfg.solver) { Some(BandedLu::factor(&matrix)?) } else { None };
            cache.insert(key, CachedSystem { matrix, lu });
        }
        let sys = &cache[&key];
        let e = ops.explicit(cfg, profile, g, t0, t1)?;
        let rhs = ops.rhs(&e, cfg, profile, g, t1, &state.values)?;
        if !all_finite(&rhs) {
            return Err(Error::NonFinite { step: n, time: t1 });
        }
        let solved = match &sys.lu {
            Some(lu) => solve_with_factor(lu, &sys.matrix, &rhs, &opts),
            None => gmres(&sys.matrix, &rhs, Some(&state.values), &opts),
        };
        let x = match solved {
            Err(SolverError::NotConverged { final_residual, .. }) if !final_residual.is_finite() => {
                return Err(Error::NonFinite { step: n, time: t1 });
            }
            other => other?,
        };
        if !all_finite(&x) {
            return Err(Error::NonFinite { step: n, time: t1 });
        }
        state = MagState { values: x, time: t1, step: n };
        observer(&state, &sys.matrix);
    }
    Ok(state)
}

/// A configured simulation: geometry, media, waveform, boundary treatment
/// and initial magnetization.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub mesh: Mesh,
    pub geometry: GeometryTables,
    pub phase: PhaseFunction,
    pub media: Media,
    /// Membrane permeability in µm/µs (= m/s).
    pub kappa: f64,
    pub profile: TemporalProfile,
    pub boundary: BoundaryCondition,
    pub formulation: Formulation,
    pub layout: LayoutMode,
    pub config: StepperConfig,
    /// Initial magnetization per cell.
    pub initial: Vec<f64>,
    pub periodic_axes: Vec<usize>,
    /// Matching tolerance for periodic faces (µm).
    pub periodic_tol: f64,
}

impl Simulation {
    /// Single-phase simulation with Neumann boundaries, unit initial
    /// magnetization and default stepping.
    pub fn new(mesh: Mesh, media: Media, profile: TemporalProfile) -> Result<Self> {
        let geometry = mesh.geometry()?;
        let n = mesh.n_cells();
        if media.len() != n {
            return Err(Error::Config(format!("media has {} cells, mesh has {n}", media.len())));
        }
        let periodic_axes = (0..mesh.embed_dim()).collect();
        let periodic_tol = mesh.default_periodic_tol();
        Ok(Self {
            geometry,
            phase: PhaseFunction::uniform(n),
            media,
            kappa: 0.0,
            profile,
            boundary: BoundaryCondition::Neumann,
            formulation: Formulation::Untransformed,
            layout: LayoutMode::Single,
            config: StepperConfig::default(),
            initial: vec![1.0; n],
            periodic_axes,
            periodic_tol,
            mesh,
        })
    }

    /// Two-field layout with the given phase and permeability.
    pub fn with_phase(mut self, phase: PhaseFunction, kappa: f64) -> Result<Self> {
        if phase.len() != self.mesh.n_cells() {
            return Err(Error::Config(format!("phase has {} cells, mesh has {}", phase.len(), self.mesh.n_cells())));
        }
        self.layout = if phase.is_two_phase() { LayoutMode::Pufem } else { LayoutMode::Single };
        self.phase = phase;
        self.kappa = kappa;
        Ok(self)
    }

    /// Sets the boundary treatment and the matching formulation.
    pub fn with_boundary(mut self, bc: BoundaryCondition) -> Self {
        self.boundary = bc;
        self.formulation = match bc {
            BoundaryCondition::PeriodicStrong => Formulation::Transformed,
            BoundaryCondition::PeriodicWeak => Formulation::Untransformed,
            BoundaryCondition::Neumann => self.formulation,
        };
        self
    }

    pub fn with_formulation(mut self, f: Formulation) -> Self {
        self.formulation = f;
        self
    }

    pub fn with_config(mut self, cfg: StepperConfig) -> Self {
        self.config = cfg;
        self
    }

    pub fn with_initial(mut self, per_cell: Vec<f64>) -> Result<Self> {
        if per_cell.len() != self.mesh.n_cells() {
            return Err(Error::Config(format!(
                "initial values have {} cells, mesh has {}",
                per_cell.len(),
                self.mesh.n_cells()
            )));
        }
        self.initial = per_cell;
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        self.config.validate()?;
        match (self.boundary, self.formulation) {
            (BoundaryCondition::PeriodicStrong, Formulation::Untransformed) => {
                Err(Error::Config("strong periodic boundaries need the transformed formulation".into()))
            }
            (BoundaryCondition::PeriodicWeak, Formulation::Transformed) => {
                Err(Error::Config("weak periodic boundaries need the untransformed formulation".into()))
            }
            _ => Ok(()),
        }
    }

    /// Assembles the constituents for a gradient direction.
    pub fn system(&self, direction: [f64; 3]) -> Result<FemSystem> {
        let domain = Domain { mesh: &self.mesh, geometry: &self.geometry, phase: &self.phase, media: &self.media };
        Ok(FemSystem::assemble(
            &domain,
            self.kappa,
            direction,
            self.layout,
            self.formulation == Formulation::Transformed,
        )?)
    }

    fn constraint(&self, sys: &FemSystem) -> Result<Option<PeriodicConstraint>> {
        Ok(match self.boundary {
            BoundaryCondition::PeriodicStrong => {
                Some(build_strong_constraint(&self.mesh, &sys.layout, &self.periodic_axes, self.periodic_tol)?)
            }
            _ => None,
        })
    }

    /// Operators for one direction, plus the strong constraint if any.
    pub fn operators(&self, sys: &FemSystem) -> Result<(StepOperators, Option<PeriodicConstraint>)> {
        self.check()?;
        let pc = self.constraint(sys)?;
        let weak = match self.boundary {
            BoundaryCondition::PeriodicWeak => Some(build_weak_periodic(
                &self.mesh,
                &self.geometry,
                &sys.layout,
                &self.media,
                &self.periodic_axes,
                self.periodic_tol,
            )?),
            _ => None,
        };
        let ops = StepOperators::new(sys, self.formulation, pc.as_ref(), weak)?;
        Ok((ops, pc))
    }

    /// Initial magnetization on the full dof layout.
    pub fn initial_state(&self, sys: &FemSystem) -> Vec<Complex64> {
        cell_values_to_dofs(&self.mesh, &sys.layout, &self.initial)
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect()
    }

    /// Signal of the initial magnetization.
    pub fn initial_signal(&self, sys: &FemSystem) -> Complex64 {
        compute_signal(&sys.mass, &self.initial_state(sys))
    }

    /// Runs one gradient setting on a prepared system and returns the final
    /// full-layout magnetization `U(T)`. `observer` sees every step matrix.
    pub fn run_one_with(
        &self,
        sys: &FemSystem,
        ops: &StepOperators,
        pc: Option<&PeriodicConstraint>,
        g: f64,
        observer: impl FnMut(&MagState, &CsrMatrix),
    ) -> Result<MagState> {
        let u0 = self.initial_state(sys);
        let start = match pc {
            Some(pc) => pc.restrict(&u0)?,
            None => u0,
        };
        let mut state = march(ops, &self.config, &self.profile, g, start, observer)?;
        if let Some(pc) = pc {
            state.values = pc.prolong(&state.values);
        }
        if self.formulation == Formulation::Transformed {
            let big_f = self.profile.final_integral();
            if big_f != 0.0 {
                for (d, v) in state.values.iter_mut().enumerate() {
                    let x = self.mesh.vertex(sys.layout.dof_vertex(d));
                    let phase = -GAMMA * big_f * g * (0..3).map(|k| sys.direction[k] * x[k]).sum::<f64>();
                    *v *= Complex64::from_polar(1.0, phase);
                }
            }
        }
        Ok(state)
    }

    /// Signal records for every gradient setting, in input order. Settings
    /// run in parallel; each run is sequential in time.
    pub fn run(&self, gradients: &[GradientSpec]) -> Result<Vec<SignalRecord>> {
        self.check()?;
        let mut systems: Vec<([f64; 3], FemSystem, StepOperators, Option<PeriodicConstraint>)> = Vec::new();
        for gs in gradients {
            let d = gs.direction();
            if !systems.iter().any(|s| s.0 == d) {
                let sys = self.system(d)?;
                let (ops, pc) = self.operators(&sys)?;
                systems.push((d, sys, ops, pc));
            }
        }
        gradients
            .par_iter()
            .map(|gs| {
                let (_, sys, ops, pc) = systems.iter().find(|s| s.0 == gs.direction()).unwrap();
                let s0 = self.initial_signal(sys);
                let state = self.run_one_with(sys, ops, pc.as_ref(), gs.g, |_, _| {})?;
                let signal = compute_signal(&sys.mass, &state.values);
                let attenuation = if s0.norm() > 0.0 { signal.norm() / s0.norm() } else { 0.0 };
                Ok(SignalRecord {
                    b: gs.b_value(&self.profile),
                    g: gs.g,
                    direction: gs.direction(),
                    signal,
                    attenuation,
                })
            })
            .collect()
    }

    /// Runs a list of b-values along one direction.
    pub fn run_b_values(&self, direction: [f64; 3], b_values: &[f64]) -> Result<Vec<SignalRecord>> {
        let gs = b_values
            .iter()
            .map(|&b| GradientSpec::from_b(&self.profile, direction, b))
            .collect::<Result<Vec<_>, _>>()?;
        self.run(&gs)
    }
}

/// Convenience wrapper over [`Simulation::run`].
pub fn run_simulation(sim: &Simulation, gradients: &[GradientSpec]) -> Result<Vec<SignalRecord>> {
    sim.run(gradients)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{DiffusionTensor, DEFAULT_T2};
    use crate::mesh::build_structured_mesh;

    fn interval(n: usize, len: f64) -> Mesh {
        build_structured_mesh(&[0.0], &[len], &[n]).unwrap()
    }

    #[test]
    fn grid_includes_breakpoints() {
        let p = TemporalProfile::pgse(10600.0, 43100.0).unwrap();
        let t = time_grid(&p, 400.0);
        for bp in [0.0, 10600.0, 43100.0, 53700.0] {
            assert!(t.contains(&bp), "{bp}");
        }
        assert!(t.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 400.0 + 1e-9));
    }

    #[test]
    fn grid_merges_near_duplicates() {
        let p = TemporalProfile::pgse(1000.0, 3000.0).unwrap();
        let t = time_grid(&p, 1000.0 / 3.0);
        assert!(t.windows(2).all(|w| w[1] - w[0] > 1e-3));
        assert_eq!(*t.last().unwrap(), 4000.0);
    }

    #[test]
    fn pure_diffusion_matrix() {
        let m = interval(4, 4.0);
        let media = Media::uniform(4, DiffusionTensor::Isotropic(2e-3), DEFAULT_T2).unwrap();
        let p = TemporalProfile::pgse(1000.0, 2000.0).unwrap();
        let sim = Simulation::new(m, media, p).unwrap();
        let sys = sim.system([1.0, 0.0, 0.0]).unwrap();
        let (ops, _) = sim.operators(&sys).unwrap();
        let cfg = StepperConfig { dt: 50.0, ..Default::default() };
        let (a, _) = ops.step_matrices(&cfg, &sim.profile, 0.0, 0.0, 50.0).unwrap();
        let expect = CsrMatrix::linear_combination(&[
            (Complex64::new(1.0 / 50.0, 0.0), &sys.mass),
            (Complex64::new(0.5, 0.0), &sys.stiffness),
            (Complex64::new(0.5, 0.0), &sys.relaxation),
        ]);
        let (da, de) = (a.to_dense(), expect.to_dense());
        for i in 0..5 {
            for j in 0..5 {
                assert!((da[i][j] - de[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn backward_euler_decay() {
        // uniform T2 with theta = 1: u¹ = u⁰ / (1 + k/T2) per step
        let m = interval(3, 3.0);
        let t2 = 500.0;
        let media = Media::uniform(3, DiffusionTensor::Isotropic(1e-3), t2).unwrap();
        let p = TemporalProfile::pgse(100.0, 200.0).unwrap();
        let cfg = StepperConfig { theta: 1.0, dt: 100.0, ..Default::default() };
        let sim = Simulation::new(m, media, p).unwrap().with_config(cfg);
        let rec = sim.run(&[GradientSpec::from_g([1.0, 0.0, 0.0], 0.0).unwrap()]).unwrap();
        let expect = 3.0 / (1.0 + 100.0 / t2).powi(3);
        assert!((rec[0].signal.re - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn b_zero_conserves_mass() {
        let m = build_structured_mesh(&[0.0; 2], &[2.0, 1.0], &[4, 2]).unwrap();
        let n = m.n_cells();
        let media = Media::uniform(n, DiffusionTensor::Isotropic(3e-3), DEFAULT_T2).unwrap();
        let p = TemporalProfile::pgse(1000.0, 3000.0).unwrap();
        let sim = Simulation::new(m, media, p).unwrap();
        let rec = sim.run_b_values([1.0, 0.0, 0.0], &[0.0]).unwrap();
        assert!((rec[0].signal - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((rec[0].attenuation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_mode_mismatch_is_rejected() {
        let m = interval(4, 4.0);
        let media = Media::uniform(4, DiffusionTensor::Isotropic(2e-3), DEFAULT_T2).unwrap();
        let p = TemporalProfile::pgse(1000.0, 2000.0).unwrap();
        let sim = Simulation::new(m, media, p)
            .unwrap()
            .with_boundary(BoundaryCondition::PeriodicStrong)
            .with_formulation(Formulation::Untransformed);
        assert!(matches!(sim.run_b_values([1.0, 0.0, 0.0], &[0.0]), Err(Error::Config(_))));
    }
}
