//! Finite-element simulation of the Bloch-Torrey equation for diffusion MRI.
//!
//! The crate computes the complex transverse magnetization on simplicial
//! meshes made of one or more compartments, with permeable interfaces,
//! reflecting or (pseudo-)periodic outer boundaries, arbitrary gradient
//! waveforms and T2 relaxation, and reports the signal attenuation as a
//! function of the b-value.
//!
//! Internal units are micrometers, microseconds and tesla. In this system
//! the conventional MRI units convert with a factor of one:
//! `mm²/s == µm²/µs`, `m/s == µm/µs` and `s/mm² == µs/µm²`.
//!
//! Module map:
//!
//! * [`mesh`]: simplicial meshes, geometry tables, compartments, interfaces
//!   and periodic facet pairing.
//! * [`msh`]: Gmsh MSH 2.2 reader and the native text format.
//! * [`sequences`]: gradient waveforms, `F(t)` and b-value conversion.
//! * [`sparse`]: compressed sparse row storage for complex matrices.
//! * [`assembly`]: P1 assembly of every time-independent constituent matrix.
//! * [`periodic`]: strong (dof merging) and weak (artificial permeability)
//!   periodic boundary conditions.
//! * [`solver`]: restarted GMRES and a banded direct solver.
//! * [`stepper`]: theta-method time integration and signal computation.
//! * [`oracle`]: independent finite-difference and closed-form references.

// `!(x > 0.0)` is the NaN-rejecting form used for argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix algebra they implement.
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod error;
pub mod mesh;
pub mod msh;
pub mod oracle;
pub mod periodic;
pub mod sequences;
pub mod solver;
pub mod sparse;
pub mod stepper;

pub use num_complex::Complex64;

pub use assembly::{DiffusionTensor, DofLayout, FemSystem, LayoutMode, Media};
pub use error::{Error, Result};
pub use mesh::{CompartmentMarker, InterfaceFacetSet, Mesh, PhaseFunction};
pub use sequences::{GradientSpec, TemporalProfile, GAMMA};
pub use sparse::CsrMatrix;
pub use stepper::{BoundaryCondition, Formulation, MagState, SignalRecord, Simulation, SolverChoice, StepperConfig};
