//! Block-sparse linear algebra for the Newton systems.
//!
//! The system matrix is stored as 3x3 blocks in three parts: the block
//! diagonal, a lower-triangular part over the rest-mesh node adjacency, and a
//! spill map for contact couplings between nodes that are not mesh neighbors.
//! Only matrix-vector products are ever formed; the solver is a preconditioned
//! conjugate gradient with a block-Jacobi (or, for ablations, an additive
//! subdomain) preconditioner and a stiffness-grouped warm start.

pub mod pcg;
pub mod precond;
pub mod system;
pub mod warm;

pub use pcg::{pcg_solve, LinOp, PcgOutcome};
pub use precond::{AdditivePrecond, BlockJacobi, IdentityPrecond, Preconditioner};
pub use system::BlockSparseSystem;
pub use warm::{node_stiffness_groups, stiffness_warm_start};
