//! Desk-scale elastodynamic contact simulator.
//!
//! Implicit (backward Euler) time integration of tetrahedral FEM solids with
//! intersection-free frictional contact. Contact constraints are enforced with
//! a smoothly-clamped log barrier inside a barrier-augmented Lagrangian outer
//! loop; the primal subproblems are solved by an inexact Newton-PCG scheme over
//! custom block-sparse storage, with line searches filtered by conservative
//! continuous collision detection.
//!
//! Module map:
//! - [`mesh`]: tetrahedral mesh loading, surface extraction, mass lumping
//! - [`energy`]: elastic strain energies and the inertia term, with
//!   eigen-projected stencil Hessians
//! - [`contact`]: primitive distances, the clamped log barrier, slack
//!   variables, and the fully-implicit friction potential
//! - [`collision`]: linear-BVH broad phase and cubic CCD narrow phase
//! - [`linalg`]: block-sparse storage, SpMV, PCG, block-Jacobi warm start
//! - [`optimizer`]: the augmented Lagrangian outer loop and Newton inner loop
//! - [`scene`]: scene configuration files and multi-body scene assembly
//! - [`report`]: frame output (OBJ) and per-frame statistics (CSV)

pub mod collision;
pub mod contact;
pub mod energy;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod optimizer;
pub mod report;
pub mod scene;
pub mod vecmath;

pub use error::SimError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SimError>;
