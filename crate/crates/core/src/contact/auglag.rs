//! Active contact set, augmentation set, and the barrier-augmented Lagrangian
//! contact terms with gradients and eigen-projected stencil Hessians.
//!
//! The total objective handled by the optimizer is
//! `L = E(x) + sigma * sum_{A} b(d_i, dhat) + R(x)` with the augmentation term
//! `R = sum_{A'} mu_i (dhat + s_i - d_i) + sigma * sum_{A'} b(d_i, dhat + s_i)`.
//! This module evaluates everything except `E`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::contact::barrier::{barrier, barrier_d, barrier_dd};
use crate::contact::distance::{ee_distance, vf_distance, DistanceResult};
use crate::energy::{project_psd, StencilHessian};
use crate::vecmath::Vec3;
use crate::Result;

/// Which surface primitives a pair couples. Distance evaluation reclassifies
/// degenerate closest-point configurations on the fly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PairTopo {
    /// Vertex against triangle; stencil `[v, t0, t1, t2]`.
    VertexTriangle { v: usize, tri: [usize; 3] },
    /// Edge against edge; stencil `[a0, a1, b0, b1]`.
    EdgeEdge { a: [usize; 2], b: [usize; 2] },
}

/// One active contact stencil.
#[derive(Debug, Clone, Copy)]
pub struct ContactPair {
    pub topo: PairTopo,
    /// Last evaluated closest-point data (refreshed by `evaluate`).
    pub eval: DistanceResult,
}

impl ContactPair {
    pub fn nodes(&self) -> [usize; 4] {
        match self.topo {
            PairTopo::VertexTriangle { v, tri } => [v, tri[0], tri[1], tri[2]],
            PairTopo::EdgeEdge { a, b } => [a[0], a[1], b[0], b[1]],
        }
    }

    /// Recompute distance, weights, and normal at the given positions.
    pub fn evaluate(topo: PairTopo, x: &[Vec3]) -> Result<ContactPair> {
        let eval = match topo {
            PairTopo::VertexTriangle { v, tri } => {
                vf_distance(x[v], [x[tri[0]], x[tri[1]], x[tri[2]]])?
            }
            PairTopo::EdgeEdge { a, b } => ee_distance([x[a[0]], x[a[1]]], [x[b[0]], x[b[1]]])?,
        };
        Ok(ContactPair { topo, eval })
    }
}

/// State of the augmented Lagrangian outer loop.
#[derive(Debug, Clone, Default)]
pub struct AugLagState {
    /// Active set A (pairs with d < dhat at the last rebuild).
    pub active: Vec<ContactPair>,
    /// Indices into `active` forming the augmentation set A'.
    pub aug: Vec<usize>,
    /// Per-A' multipliers, initialized to zero.
    pub mu: Vec<f64>,
    /// Per-A' slacks (>= 0).
    pub slack: Vec<f64>,
    /// Penalty scalar (> 0 once initialized).
    pub sigma: f64,
    /// sigma^0 recorded at initialization, bound for the growth ceiling.
    pub sigma0: f64,
    /// Minimum active distance observed at the previous outer iteration.
    pub min_d_prev: f64,
}

impl AugLagState {
    pub fn min_distance(&self) -> f64 {
        self.active
            .iter()
            .map(|p| p.eval.dist)
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-pair augmentation data (mu, s) if the pair is in A'.
    fn aug_of(&self, pair_index: usize) -> Option<(f64, f64)> {
        self.aug
            .iter()
            .position(|&i| i == pair_index)
            .map(|k| (self.mu[k], self.slack[k]))
    }
}

/// Rebuild the active set from candidate topologies: keep pairs with d < dhat.
/// Coincident geometry is an interior violation and propagates as an error.
pub fn build_active_set(x: &[Vec3], candidates: &[PairTopo], d_hat: f64) -> Result<Vec<ContactPair>> {
    let evaluated: Vec<Result<ContactPair>> = candidates
        .par_iter()
        .map(|&topo| ContactPair::evaluate(topo, x))
        .collect();
    let mut active = Vec::new();
    for pair in evaluated {
        let pair = pair?;
        if pair.eval.dist < d_hat {
            active.push(pair);
        }
    }
    Ok(active)
}

/// Scalar contact weight terms for one pair: value, first and second
/// derivatives w.r.t. the pair distance.
fn pair_scalar(d: f64, d_hat: f64, sigma: f64, aug: Option<(f64, f64)>) -> Result<(f64, f64, f64)> {
    let mut v = sigma * barrier(d, d_hat)?;
    let mut dv = sigma * barrier_d(d, d_hat)?;
    let mut ddv = sigma * barrier_dd(d, d_hat)?;
    if let Some((mu, s)) = aug {
        let dh = d_hat + s;
        v += mu * (dh - d) + sigma * barrier(d, dh)?;
        dv += -mu + sigma * barrier_d(d, dh)?;
        ddv += sigma * barrier_dd(d, dh)?;
    }
    Ok((v, dv, ddv))
}

/// Contact part of the augmented Lagrangian at `x` (without E).
pub fn contact_energy(x: &[Vec3], state: &AugLagState, d_hat: f64) -> Result<f64> {
    let mut total = 0.0;
    for (i, pair) in state.active.iter().enumerate() {
        let p = ContactPair::evaluate(pair.topo, x)?;
        let (v, _, _) = pair_scalar(p.eval.dist, d_hat, state.sigma, state.aug_of(i))?;
        total += v;
    }
    Ok(total)
}

/// Gradient of the contact part, chained through distance derivatives.
pub fn contact_gradient(x: &[Vec3], state: &AugLagState, d_hat: f64) -> Result<Vec<Vec3>> {
    let per_pair: Vec<Result<([usize; 4], [Vec3; 4])>> = state
        .active
        .par_iter()
        .enumerate()
        .map(|(i, pair)| {
            let p = ContactPair::evaluate(pair.topo, x)?;
            let (_, dv, _) = pair_scalar(p.eval.dist, d_hat, state.sigma, state.aug_of(i))?;
            let mut g = [Vec3::zeros(); 4];
            for k in 0..4 {
                g[k] = p.eval.normal * (dv * p.eval.coeff[k]);
            }
            Ok((p.nodes(), g))
        })
        .collect();
    let mut grad = crate::vecmath::zeros(x.len());
    for entry in per_pair {
        let (nodes, g) = entry?;
        for k in 0..4 {
            grad[nodes[k]] += g[k];
        }
    }
    Ok(grad)
}

/// Eigen-projected 12x12 stencil Hessians of the contact part.
///
/// Uses the fixed-weight distance Hessian (weights lagged at the closest
/// point), which is exact away from classification boundaries.
pub fn contact_hessians(x: &[Vec3], state: &AugLagState, d_hat: f64) -> Result<Vec<StencilHessian>> {
    let out: Vec<Result<StencilHessian>> = state
        .active
        .par_iter()
        .enumerate()
        .map(|(i, pair)| {
            let p = ContactPair::evaluate(pair.topo, x)?;
            let (_, dv, ddv) = pair_scalar(p.eval.dist, d_hat, state.sigma, state.aug_of(i))?;
            let n = p.eval.normal;
            let d = p.eval.dist;
            // Hessian of d in the difference variable: (I - n n^T)/d.
            let mut h = DMatrix::<f64>::zeros(12, 12);
            for j in 0..4 {
                for k in 0..4 {
                    let w = p.eval.coeff[j] * p.eval.coeff[k];
                    for r in 0..3 {
                        for c in 0..3 {
                            let nnt = n[r] * n[c];
                            let d2 = (if r == c { 1.0 } else { 0.0 } - nnt) / d;
                            h[(3 * j + r, 3 * k + c)] = w * (ddv * nnt + dv * d2);
                        }
                    }
                }
            }
            let (projected, eigenvalues) = project_psd(&h);
            Ok(StencilHessian {
                nodes: p.nodes().to_vec(),
                matrix: projected,
                eigenvalues,
            })
        })
        .collect();
    out.into_iter().collect()
}
