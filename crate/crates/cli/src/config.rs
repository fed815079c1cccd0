//! The JSON run configuration.
//!
//! External units follow the usual MRI conventions and convert at this
//! boundary: diffusivities in mm²/s, permeability in m/s, b-values in s/mm²
//! (all factor one into the µm/µs system), gradient amplitudes in T/m and
//! times either as a number of µs or as a string with an `s`, `ms` or `us`
//! suffix.

use std::collections::BTreeMap;
use std::path::PathBuf;

use btfem::assembly::DEFAULT_T2;
use btfem::{BoundaryCondition, DiffusionTensor, SolverChoice, TemporalProfile};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// T/m to T/µm.
pub const TESLA_PER_METER: f64 = 1e-6;

/// A time value: plain numbers are µs, strings carry a unit suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeValue {
    Micros(f64),
    Text(String),
}

impl TimeValue {
    pub fn micros(&self) -> Result<f64, CliError> {
        match self {
            TimeValue::Micros(v) => Ok(*v),
            TimeValue::Text(s) => parse_time(s),
        }
    }
}

impl From<f64> for TimeValue {
    fn from(v: f64) -> Self {
        TimeValue::Micros(v)
    }
}

/// Parses `"10.6ms"`, `"10600us"`, `"10600µs"`, `"0.0106s"` or a bare number
/// of µs into µs.
pub fn parse_time(s: &str) -> Result<f64, CliError> {
    let t = s.trim();
    let (num, scale) = if let Some(n) = t.strip_suffix("ms") {
        (n, 1e3)
    } else if let Some(n) = t.strip_suffix("us").or_else(|| t.strip_suffix("µs")) {
        (n, 1.0)
    } else if let Some(n) = t.strip_suffix('s') {
        (n, 1e6)
    } else {
        (t, 1.0)
    };
    let v: f64 = num.trim().parse().map_err(|_| CliError::Config(format!("cannot read time value {s:?}")))?;
    if !v.is_finite() {
        return Err(CliError::Config(format!("time value {s:?} is not finite")));
    }
    Ok(v * scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    /// Structured simplicial box. With `interfaces`, cells are marked by the
    /// slab of `axis` that holds their centroid (0, 1, ...).
    Box {
        min: Vec<f64>,
        max: Vec<f64>,
        cells: Vec<usize>,
        #[serde(default)]
        interfaces: Vec<f64>,
        #[serde(default)]
        axis: usize,
    },
    /// Concentric layers centred at the origin; layer `l` gets marker `l`.
    Disk { radii: Vec<f64>, h: f64 },
    /// Segments embedded in 3D, all with marker 0.
    Graph { nodes: Vec<[f64; 3]>, edges: Vec<(usize, usize)>, h: f64 },
    /// Gmsh MSH 2.2 ASCII file; physical tags become markers.
    Msh { path: PathBuf },
    /// Native text format.
    Native { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Diffusivity {
    Scalar(f64),
    Tensor([[f64; 3]; 3]),
}

impl Diffusivity {
    pub fn tensor(&self) -> DiffusionTensor {
        match self {
            Diffusivity::Scalar(d) => DiffusionTensor::Isotropic(*d),
            Diffusivity::Tensor(m) => DiffusionTensor::Anisotropic(*m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Compartment {
    /// mm²/s.
    #[serde(rename = "D")]
    pub diffusivity: Diffusivity,
    #[serde(rename = "T2", default = "default_t2")]
    pub t2: TimeValue,
    #[serde(default = "default_ic")]
    pub ic: f64,
}

fn default_t2() -> TimeValue {
    TimeValue::Micros(DEFAULT_T2)
}

fn default_ic() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSpec {
    Pgse { delta: TimeValue, big_delta: TimeValue },
    DoublePgse { delta: TimeValue, big_delta: TimeValue },
    CosOgse { delta: TimeValue, big_delta: TimeValue, n: u32 },
    SinOgse { delta: TimeValue, big_delta: TimeValue, n: u32 },
    TrapPgse { delta: TimeValue, big_delta: TimeValue, ramp: TimeValue },
    DoubleTrapPgse { delta: TimeValue, big_delta: TimeValue, ramp: TimeValue },
}

impl SequenceSpec {
    pub fn profile(&self) -> Result<TemporalProfile, CliError> {
        use SequenceSpec::*;
        let p = match self {
            Pgse { delta, big_delta } => TemporalProfile::pgse(delta.micros()?, big_delta.micros()?),
            DoublePgse { delta, big_delta } => TemporalProfile::double_pgse(delta.micros()?, big_delta.micros()?),
            CosOgse { delta, big_delta, n } => TemporalProfile::cos_ogse(delta.micros()?, big_delta.micros()?, *n),
            SinOgse { delta, big_delta, n } => TemporalProfile::sin_ogse(delta.micros()?, big_delta.micros()?, *n),
            TrapPgse { delta, big_delta, ramp } => {
                TemporalProfile::trapezoidal_pgse(delta.micros()?, big_delta.micros()?, ramp.micros()?)
            }
            DoubleTrapPgse { delta, big_delta, ramp } => {
                TemporalProfile::double_trapezoidal_pgse(delta.micros()?, big_delta.micros()?, ramp.micros()?)
            }
        };
        p.map_err(|e| CliError::Config(e.to_string()))
    }

    fn timings_mut(&mut self) -> (&mut TimeValue, &mut TimeValue) {
        use SequenceSpec::*;
        match self {
            Pgse { delta, big_delta }
            | DoublePgse { delta, big_delta }
            | CosOgse { delta, big_delta, .. }
            | SinOgse { delta, big_delta, .. }
            | TrapPgse { delta, big_delta, .. }
            | DoubleTrapPgse { delta, big_delta, .. } => (delta, big_delta),
        }
    }

    pub fn set_delta(&mut self, v: TimeValue) {
        *self.timings_mut().0 = v;
    }

    pub fn set_big_delta(&mut self, v: TimeValue) {
        *self.timings_mut().1 = v;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientConfig {
    pub direction: [f64; 3],
    /// s/mm².
    #[serde(default)]
    pub b_list: Option<Vec<f64>>,
    /// T/m.
    #[serde(default)]
    pub g_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(default = "default_dt")]
    pub dt: TimeValue,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { dt: default_dt(), theta: default_theta() }
    }
}

fn default_dt() -> TimeValue {
    TimeValue::Micros(200.0)
}

fn default_theta() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcMode {
    #[default]
    Neumann,
    PeriodicStrong,
    PeriodicWeak,
}

impl From<BcMode> for BoundaryCondition {
    fn from(m: BcMode) -> Self {
        match m {
            BcMode::Neumann => BoundaryCondition::Neumann,
            BcMode::PeriodicStrong => BoundaryCondition::PeriodicStrong,
            BcMode::PeriodicWeak => BoundaryCondition::PeriodicWeak,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    #[default]
    Auto,
    Direct,
    Iterative,
}

impl From<SolverMethod> for SolverChoice {
    fn from(m: SolverMethod) -> Self {
        match m {
            SolverMethod::Auto => SolverChoice::Auto,
            SolverMethod::Direct => SolverChoice::Direct,
            SolverMethod::Iterative => SolverChoice::Iterative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: SolverMethod,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_restart")]
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Auto,
            tol: default_tol(),
            max_iter: default_max_iter(),
            restart: default_restart(),
        }
    }
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    5000
}

fn default_restart() -> usize {
    60
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub svg: Option<PathBuf>,
    /// Logarithmic attenuation axis in the plot.
    #[serde(default)]
    pub log_y: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: MeshSource,
    /// Keyed by cell marker.
    pub compartments: BTreeMap<u32, Compartment>,
    /// Interface permeability in m/s.
    #[serde(default)]
    pub kappa: f64,
    pub sequence: SequenceSpec,
    pub gradient: GradientConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub bc: BcMode,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Worker threads for the b-value fan-out; the rayon default when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.compartments.is_empty() {
            return bad("the compartment table is empty".into());
        }
        for (id, c) in &self.compartments {
            let ok = match &c.diffusivity {
                Diffusivity::Scalar(d) => *d > 0.0 && d.is_finite(),
                Diffusivity::Tensor(m) => m.iter().flatten().all(|v| v.is_finite()),
            };
            if !ok {
                return bad(format!("compartment {id}: invalid diffusivity"));
            }
            if !(c.t2.micros()? > 0.0) {
                return bad(format!("compartment {id}: T2 must be positive"));
            }
            if !c.ic.is_finite() {
                return bad(format!("compartment {id}: initial value must be finite"));
            }
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return bad(format!("kappa must be non-negative, got {}", self.kappa));
        }
        let d = self.gradient.direction;
        if !d.iter().all(|v| v.is_finite()) || d.iter().all(|&v| v == 0.0) {
            return bad("gradient direction must be nonzero".into());
        }
        match (&self.gradient.b_list, &self.gradient.g_list) {
            (Some(b), None) => {
                if b.is_empty() || b.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return bad("b_list needs non-negative finite values".into());
                }
            }
            (None, Some(g)) => {
                if g.is_empty() || g.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return bad("g_list needs non-negative finite values".into());
                }
            }
            _ => return bad("give exactly one of gradient.b_list and gradient.g_list".into()),
        }
        if !(self.time.dt.micros()? > 0.0) {
            return bad("time.dt must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.time.theta) {
            return bad(format!("time.theta must lie in [0, 1], got {}", self.time.theta));
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        self.sequence.profile()?;
        Ok(())
    }
}
