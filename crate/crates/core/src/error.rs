use thiserror::Error;

use crate::assembly::AssemblyError;
use crate::mesh::MeshError;
use crate::msh::ParseError;
use crate::oracle::OracleError;
use crate::periodic::PeriodicError;
use crate::sequences::SequenceError;
use crate::solver::SolverError;

/// Crate-level error, one variant per subsystem.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Periodic(#[from] PeriodicError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite magnetization at step {step} (t = {time} µs)")]
    NonFinite { step: usize, time: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
