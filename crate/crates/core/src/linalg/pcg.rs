//! Preconditioned conjugate gradient over 3-vectors per node.

use super::precond::Preconditioner;
use super::system::BlockSparseSystem;
use crate::vecmath::{self, Vec3};

/// Anything that can apply a symmetric positive (semi)definite operator.
pub trait LinOp {
    fn len(&self) -> usize;
    fn apply(&self, v: &[Vec3], y: &mut [Vec3]);
}

impl LinOp for BlockSparseSystem {
    fn len(&self) -> usize {
        self.n_nodes()
    }
    fn apply(&self, v: &[Vec3], y: &mut [Vec3]) {
        self.spmv(v, y);
    }
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: Vec<Vec3>,
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
    pub stagnated: bool,
}

/// Window over which a non-improving residual counts as stagnation.
const STAGNATION_WINDOW: usize = 100;

/// Solve A x = b to a relative residual of `tol`, starting from `x0` when
/// given. Terminates early if the best residual seen has not improved over
/// the trailing window, or at the iteration cap.
pub fn pcg_solve(
    op: &dyn LinOp,
    rhs: &[Vec3],
    x0: Option<&[Vec3]>,
    precond: &dyn Preconditioner,
    tol: f64,
    max_iters: usize,
) -> PcgOutcome {
    let n = op.len();
    debug_assert_eq!(rhs.len(), n);
    let norm_b = vecmath::norm(rhs);
    let mut x = match x0 {
        Some(g) => g.to_vec(),
        None => vecmath::zeros(n),
    };
    if norm_b == 0.0 {
        return PcgOutcome {
            x: vecmath::zeros(n),
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
            stagnated: false,
        };
    }

    let mut r = vecmath::zeros(n);
    let mut tmp = vecmath::zeros(n);
    op.apply(&x, &mut tmp);
    for i in 0..n {
        r[i] = rhs[i] - tmp[i];
    }
    let mut rel = vecmath::norm(&r) / norm_b;
    if rel <= tol {
        return PcgOutcome {
            x,
            iterations: 0,
            rel_residual: rel,
            converged: true,
            stagnated: false,
        };
    }

    let mut z = vecmath::zeros(n);
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = vecmath::dot(&r, &z);

    let mut best = rel;
    let mut since_best = 0usize;
    let mut iterations = 0usize;
    let mut stagnated = false;

    while iterations < max_iters {
        op.apply(&p, &mut tmp);
        let p_ap = vecmath::dot(&p, &tmp);
        if p_ap <= 0.0 || !p_ap.is_finite() {
            stagnated = true;
            break;
        }
        let alpha = rz / p_ap;
        vecmath::axpy(alpha, &p, &mut x);
        vecmath::axpy(-alpha, &tmp, &mut r);
        iterations += 1;
        rel = vecmath::norm(&r) / norm_b;
        if rel <= tol {
            break;
        }
        if rel < best {
            best = rel;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STAGNATION_WINDOW {
                stagnated = true;
                break;
            }
        }
        precond.apply(&r, &mut z);
        let rz_new = vecmath::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    PcgOutcome {
        x,
        iterations,
        rel_residual: rel,
        converged: rel <= tol,
        stagnated,
    }
}
