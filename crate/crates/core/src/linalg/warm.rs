//! Stiffness-grouped warm start for the Newton linear solves.
//!
//! Nodes are bucketed by the decimal order of magnitude of their accumulated
//! stencil stiffness. Each bucket gets a cheap restricted sub-solve (the
//! operator and right-hand side masked to the bucket's nodes), and the
//! concatenated bucket solutions seed the full solve. Stiff regions thus get
//! a head start without waiting on soft ones.

use super::pcg::{pcg_solve, LinOp};
use super::precond::{BlockJacobi, Preconditioner};
use super::system::BlockSparseSystem;
use crate::vecmath::{self, Vec3};

/// Bucket index per node: floor(log10 e). Zero stiffness sinks to the lowest
/// bucket.
pub fn node_stiffness_groups(node_energy: &[f64]) -> Vec<i32> {
    node_energy
        .iter()
        .map(|&e| if e > 0.0 { e.log10().floor() as i32 } else { i32::MIN })
        .collect()
}

struct MaskedOp<'a> {
    sys: &'a BlockSparseSystem,
    mask: &'a [bool],
}

impl LinOp for MaskedOp<'_> {
    fn len(&self) -> usize {
        self.sys.n_nodes()
    }
    fn apply(&self, v: &[Vec3], y: &mut [Vec3]) {
        // v is zero outside the mask by construction; only the output needs
        // re-masking.
        self.sys.spmv(v, y);
        for i in 0..y.len() {
            if !self.mask[i] {
                y[i] = Vec3::zeros();
            }
        }
    }
}

struct MaskedPrecond<'a> {
    inner: &'a BlockJacobi,
    mask: &'a [bool],
}

impl Preconditioner for MaskedPrecond<'_> {
    fn apply(&self, r: &[Vec3], z: &mut [Vec3]) {
        self.inner.apply(r, z);
        for i in 0..z.len() {
            if !self.mask[i] {
                z[i] = Vec3::zeros();
            }
        }
    }
}

const SUB_TOL: f64 = 1e-2;
const SUB_MAX_ITERS: usize = 100;

/// Initial guess for A x = rhs assembled from per-bucket restricted solves.
/// A bucket whose sub-solve stagnates contributes zeros.
pub fn stiffness_warm_start(
    sys: &BlockSparseSystem,
    rhs: &[Vec3],
    node_energy: &[f64],
) -> Vec<Vec3> {
    let n = sys.n_nodes();
    debug_assert_eq!(rhs.len(), n);
    debug_assert_eq!(node_energy.len(), n);
    let groups = node_stiffness_groups(node_energy);
    let mut distinct: Vec<i32> = groups.clone();
    distinct.sort_unstable();
    distinct.dedup();

    let jacobi = BlockJacobi::from_system(sys);
    let mut guess = vecmath::zeros(n);
    for g in distinct {
        let mask: Vec<bool> = groups.iter().map(|&gi| gi == g).collect();
        let mut sub_rhs = vecmath::zeros(n);
        for i in 0..n {
            if mask[i] {
                sub_rhs[i] = rhs[i];
            }
        }
        let op = MaskedOp { sys, mask: &mask };
        let pc = MaskedPrecond { inner: &jacobi, mask: &mask };
        let out = pcg_solve(&op, &sub_rhs, None, &pc, SUB_TOL, SUB_MAX_ITERS);
        let usable = out.x.iter().all(|v| v.x.is_finite() && v.y.is_finite() && v.z.is_finite())
            && !(out.stagnated && !out.converged);
        if usable {
            for i in 0..n {
                if mask[i] {
                    guess[i] = out.x[i];
                }
            }
        }
    }
    guess
}
