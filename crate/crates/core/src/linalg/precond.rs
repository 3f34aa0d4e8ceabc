//! Preconditioners for the conjugate gradient solver.

use nalgebra::{DMatrix, DVector, Matrix3};

use super::system::BlockSparseSystem;
use crate::vecmath::Vec3;

pub trait Preconditioner {
    /// z = M^{-1} r.
    fn apply(&self, r: &[Vec3], z: &mut [Vec3]);
}

pub struct IdentityPrecond;

impl Preconditioner for IdentityPrecond {
    fn apply(&self, r: &[Vec3], z: &mut [Vec3]) {
        z.copy_from_slice(r);
    }
}

/// Inverse of the 3x3 diagonal blocks. Near-singular blocks are shifted by a
/// small multiple of their trace before inversion.
pub struct BlockJacobi {
    inv: Vec<Matrix3<f64>>,
}

impl BlockJacobi {
    pub fn from_blocks(blocks: &[Matrix3<f64>]) -> BlockJacobi {
        let inv = blocks
            .iter()
            .map(|b| {
                b.try_inverse().unwrap_or_else(|| {
                    let shift = 1e-12 * b.trace().abs().max(1.0);
                    (b + Matrix3::identity() * shift)
                        .try_inverse()
                        .unwrap_or_else(Matrix3::identity)
                })
            })
            .collect();
        BlockJacobi { inv }
    }

    pub fn from_system(sys: &BlockSparseSystem) -> BlockJacobi {
        let blocks: Vec<Matrix3<f64>> =
            (0..sys.n_nodes()).map(|i| *sys.diag_block(i)).collect();
        BlockJacobi::from_blocks(&blocks)
    }
}

impl Preconditioner for BlockJacobi {
    fn apply(&self, r: &[Vec3], z: &mut [Vec3]) {
        for i in 0..r.len() {
            z[i] = self.inv[i] * r[i];
        }
    }
}

/// Additive subdomain preconditioner: contiguous node groups of 1, 3, and 9
/// nodes (3, 9, and 27 scalar unknowns) form restriction operators B, and
/// M^{-1} = sum over groups of B^T (B A B^T)^{-1} B. Kept for ablation runs.
pub struct AdditivePrecond {
    levels: Vec<Level>,
}

struct Level {
    group_size: usize,
    /// Inverted dense subblocks, one per group, in group order.
    inverses: Vec<DMatrix<f64>>,
}

const GROUP_SIZES: [usize; 3] = [1, 3, 9];

impl AdditivePrecond {
    pub fn from_system(sys: &BlockSparseSystem) -> AdditivePrecond {
        let n = sys.n_nodes();
        let mut levels = Vec::new();
        for &gs in &GROUP_SIZES {
            let mut inverses = Vec::new();
            let mut start = 0;
            while start < n {
                let len = gs.min(n - start);
                let mut sub = DMatrix::zeros(3 * len, 3 * len);
                for a in 0..len {
                    for b in 0..len {
                        let blk = sys.block(start + a, start + b);
                        for r in 0..3 {
                            for c in 0..3 {
                                sub[(3 * a + r, 3 * b + c)] = blk[(r, c)];
                            }
                        }
                    }
                }
                let dim = 3 * len;
                let inv = sub.clone().try_inverse().unwrap_or_else(|| {
                    let shift = 1e-12 * sub.trace().abs().max(1.0);
                    (sub + DMatrix::identity(dim, dim) * shift)
                        .try_inverse()
                        .unwrap_or_else(|| DMatrix::identity(dim, dim))
                });
                inverses.push(inv);
                start += len;
            }
            levels.push(Level { group_size: gs, inverses });
        }
        AdditivePrecond { levels }
    }
}

impl Preconditioner for AdditivePrecond {
    fn apply(&self, r: &[Vec3], z: &mut [Vec3]) {
        let n = r.len();
        for v in z.iter_mut() {
            *v = Vec3::zeros();
        }
        for level in &self.levels {
            let mut start = 0;
            for inv in &level.inverses {
                let len = level.group_size.min(n - start);
                let rg = DVector::from_iterator(
                    3 * len,
                    r[start..start + len].iter().flat_map(|p| [p.x, p.y, p.z]),
                );
                let xg = inv * rg;
                for a in 0..len {
                    z[start + a] += Vec3::new(xg[3 * a], xg[3 * a + 1], xg[3 * a + 2]);
                }
                start += len;
            }
        }
    }
}
