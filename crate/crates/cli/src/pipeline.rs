//! Configuration to signal records.

use std::path::{Path, PathBuf};

use btfem::mesh::{build_graph_mesh, build_layered_disk, build_structured_mesh, phase_from_marker};
use btfem::msh::{parse_msh, read_native, to_mesh};
use btfem::oracle::{fd_reference_signal, FdConfig, FdInterface};
use btfem::{CompartmentMarker, GradientSpec, Media, Mesh, SignalRecord, Simulation, StepperConfig, TemporalProfile};
use log::{info, warn};

use crate::config::{Diffusivity, MeshSource, RunConfig, TESLA_PER_METER};
use crate::error::CliError;

/// Reads a configuration and makes its relative paths relative to the
/// directory of the file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let rebase = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    match &mut cfg.mesh {
        MeshSource::Msh { path } | MeshSource::Native { path } => rebase(path),
        _ => {}
    }
    if let Some(p) = cfg.output.csv.as_mut() {
        rebase(p);
    }
    if let Some(p) = cfg.output.svg.as_mut() {
        rebase(p);
    }
    Ok(cfg)
}

fn mesh_err(e: impl std::fmt::Display) -> CliError {
    CliError::Mesh(e.to_string())
}

/// Builds or reads the mesh and its cell markers.
pub fn load_mesh(source: &MeshSource) -> Result<(Mesh, CompartmentMarker), CliError> {
    match source {
        MeshSource::Box { min, max, cells, interfaces, axis } => {
            let mesh = build_structured_mesh(min, max, cells).map_err(mesh_err)?;
            if interfaces.is_empty() {
                let n = mesh.n_cells();
                return Ok((mesh, CompartmentMarker::uniform(n, 0)));
            }
            if *axis >= min.len() {
                return Err(CliError::Config(format!("interface axis {axis} outside a {}D box", min.len())));
            }
            if interfaces.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::Config("box interfaces must be increasing".into()));
            }
            let values = (0..mesh.n_cells())
                .map(|c| {
                    let x = mesh.cell_centroid(c)[*axis];
                    interfaces.iter().filter(|&&p| p < x).count() as u32
                })
                .collect();
            let marker = CompartmentMarker::for_mesh(&mesh, values).map_err(mesh_err)?;
            Ok((mesh, marker))
        }
        MeshSource::Disk { radii, h } => build_layered_disk(radii, *h).map_err(mesh_err),
        MeshSource::Graph { nodes, edges, h } => {
            let mesh = build_graph_mesh(nodes, edges, *h).map_err(mesh_err)?;
            let n = mesh.n_cells();
            Ok((mesh, CompartmentMarker::uniform(n, 0)))
        }
        MeshSource::Msh { path } => {
            let bytes = std::fs::read(path).map_err(|e| CliError::Mesh(format!("{}: {e}", path.display())))?;
            let doc = parse_msh(&bytes).map_err(mesh_err)?;
            let m = to_mesh(&doc).map_err(mesh_err)?;
            Ok((m.mesh, m.marker))
        }
        MeshSource::Native { path } => {
            let bytes = std::fs::read(path).map_err(|e| CliError::Mesh(format!("{}: {e}", path.display())))?;
            let (mesh, marker) = read_native(&bytes).map_err(mesh_err)?;
            let marker = marker.unwrap_or_else(|| CompartmentMarker::uniform(mesh.n_cells(), 0));
            Ok((mesh, marker))
        }
    }
}

/// Checks the `-M` switch against the markers present in the mesh.
pub fn check_multi(multi: Option<u8>, marker: &CompartmentMarker) -> Result<(), CliError> {
    let several = marker.distinct().len() > 1;
    match multi {
        Some(1) if !several => Err(CliError::Config("-M 1 given but the mesh has a single compartment".into())),
        Some(0) if several => {
            Err(CliError::Config(format!("-M 0 given but the mesh has {} compartments", marker.distinct().len())))
        }
        _ => Ok(()),
    }
}

fn gradients(cfg: &RunConfig, profile: &TemporalProfile) -> Result<Vec<GradientSpec>, CliError> {
    let dir = cfg.gradient.direction;
    let specs: Result<Vec<_>, _> = match (&cfg.gradient.b_list, &cfg.gradient.g_list) {
        (Some(b), _) => b.iter().map(|&b| GradientSpec::from_b(profile, dir, b)).collect(),
        (None, Some(g)) => g.iter().map(|&g| GradientSpec::from_g(dir, g * TESLA_PER_METER)).collect(),
        (None, None) => return Err(CliError::Config("no gradient list".into())),
    };
    specs.map_err(|e| CliError::Config(e.to_string()))
}

fn profile_checked(cfg: &RunConfig) -> Result<TemporalProfile, CliError> {
    let profile = cfg.sequence.profile()?;
    if !profile.is_refocused() {
        warn!(
            "the gradient profile does not refocus (F(T) = {:e}); the readout phase is applied",
            profile.final_integral()
        );
    }
    Ok(profile)
}

fn stepper_config(cfg: &RunConfig) -> Result<StepperConfig, CliError> {
    Ok(StepperConfig {
        theta: cfg.time.theta,
        dt: cfg.time.dt.micros()?,
        tol: cfg.solver.tol,
        max_iter: cfg.solver.max_iter,
        restart: cfg.solver.restart,
        solver: cfg.solver.method.into(),
    })
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Finite-element signals for every configured gradient, in input order.
pub fn simulate(cfg: &RunConfig, multi: Option<u8>) -> Result<Vec<SignalRecord>, CliError> {
    let (mesh, marker) = load_mesh(&cfg.mesh)?;
    check_multi(multi, &marker)?;
    info!("mesh: {} vertices, {} cells, markers {:?}", mesh.n_vertices(), mesh.n_cells(), marker.distinct());
    let table = &cfg.compartments;
    let media = Media::from_marker(&marker, |m| {
        let c = table.get(&m)?;
        Some((c.diffusivity.tensor(), c.t2.micros().ok()?))
    })
    .map_err(|e| CliError::Config(e.to_string()))?;
    let initial = marker.values().iter().map(|m| table[m].ic).collect();

    let profile = profile_checked(cfg)?;
    let grads = gradients(cfg, &profile)?;
    let phase = phase_from_marker(&marker);
    let mut sim = Simulation::new(mesh, media, profile)?;
    if phase.is_two_phase() {
        sim = sim.with_phase(phase, cfg.kappa)?;
    } else if cfg.kappa > 0.0 {
        info!("single compartment: kappa is unused");
    }
    let sim = sim.with_boundary(cfg.bc.into()).with_config(stepper_config(cfg)?).with_initial(initial)?;
    Ok(in_pool(cfg.threads, || sim.run(&grads))??)
}

/// Finite-difference reference signals for a 1D box configuration.
pub fn oracle(cfg: &RunConfig, grid: usize) -> Result<Vec<SignalRecord>, CliError> {
    let MeshSource::Box { min, max, interfaces, .. } = &cfg.mesh else {
        return Err(CliError::Config("the oracle needs a builtin 1D box mesh".into()));
    };
    if min.len() != 1 || max.len() != 1 {
        return Err(CliError::Config("the oracle needs a 1D box".into()));
    }
    if cfg.bc != crate::config::BcMode::Neumann {
        return Err(CliError::Config("the oracle supports reflecting ends only".into()));
    }
    let pieces = interfaces.len() + 1;
    let mut diffusion = Vec::with_capacity(pieces);
    let mut t2 = Vec::with_capacity(pieces);
    let mut initial = Vec::with_capacity(pieces);
    for i in 0..pieces as u32 {
        let c =
            cfg.compartments.get(&i).ok_or_else(|| CliError::Config(format!("no compartment {i} for the oracle")))?;
        let Diffusivity::Scalar(d) = c.diffusivity else {
            return Err(CliError::Config("the oracle needs scalar diffusivities".into()));
        };
        diffusion.push(d);
        t2.push(c.t2.micros()?);
        initial.push(c.ic);
    }
    let profile = profile_checked(cfg)?;
    let grads = gradients(cfg, &profile)?;
    let dt = cfg.time.dt.micros()?;
    grads
        .into_iter()
        .map(|g| {
            let fd = FdConfig {
                start: min[0],
                end: max[0],
                grid,
                dt,
                interfaces: interfaces.iter().map(|&position| FdInterface { position, kappa: cfg.kappa }).collect(),
                diffusion: diffusion.clone(),
                t2: t2.clone(),
                initial: initial.clone(),
                profile: profile.clone(),
                gradient: g,
            };
            fd_reference_signal(&fd).map_err(CliError::from)
        })
        .collect()
}
