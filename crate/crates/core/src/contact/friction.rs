//! Fully-implicit friction: the mollified dissipative potential and its
//! derivatives with lagged anchors.
//!
//! Per pair j: D_j = chi * lambda_j * f(||u_j h||) with the mollifier
//! f(y) = -y^3 / (3 eps_v^2 h^2) + y^2 / (eps_v h) for y < eps_v h and the C1
//! continuation f(y) = y - eps_v h / 3 beyond it (constant sliding force).
//! The anchors (lambda, n, closest-point weights) are treated as constants
//! when differentiating and are refreshed once per inexact Newton iteration.

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;

use crate::contact::auglag::ContactPair;
use crate::contact::barrier::barrier_d;
use crate::energy::{project_psd, StencilHessian};
use crate::error::SimError;
use crate::vecmath::Vec3;
use crate::Result;

/// Frozen per-pair friction data.
#[derive(Debug, Clone, Copy)]
pub struct FrictionAnchor {
    pub nodes: [usize; 4],
    /// Signed closest-point weights at anchor time.
    pub coeff: [f64; 4],
    /// Contact normal at anchor time (unit).
    pub normal: Vec3,
    /// Normal force magnitude: lambda_j = sigma * |db/dd| at the anchor distance.
    pub lambda: f64,
}

/// Mollifier value, first, and second derivative at y = ||u h||.
fn mollifier(y: f64, eps_v: f64, h: f64) -> (f64, f64, f64) {
    let yc = eps_v * h;
    if y < yc {
        let f = -y * y * y / (3.0 * eps_v * eps_v * h * h) + y * y / yc;
        let f1 = -y * y / (eps_v * eps_v * h * h) + 2.0 * y / yc;
        let f2 = -2.0 * y / (eps_v * eps_v * h * h) + 2.0 / yc;
        (f, f1, f2)
    } else {
        (y - yc / 3.0, 1.0, 0.0)
    }
}

fn check_params(eps_v: f64, h: f64) -> Result<()> {
    if eps_v <= 0.0 {
        return Err(SimError::Invalid(format!("eps_v must be positive, got {eps_v}")));
    }
    if h <= 0.0 {
        return Err(SimError::Invalid(format!("time step must be positive, got {h}")));
    }
    Ok(())
}

/// Tangential relative displacement times 1/h: u = v_r - (v_r . n / n . n) n,
/// with v_r the weighted relative velocity of the stencil.
fn tangential_velocity(anchor: &FrictionAnchor, x: &[Vec3], x_prev: &[Vec3], h: f64) -> Vec3 {
    let mut v_r = Vec3::zeros();
    for k in 0..4 {
        v_r += (x[anchor.nodes[k]] - x_prev[anchor.nodes[k]]) * (anchor.coeff[k] / h);
    }
    let n = anchor.normal;
    v_r - n * (v_r.dot(&n) / n.dot(&n))
}

pub fn friction_potential(
    x: &[Vec3],
    x_prev: &[Vec3],
    anchors: &[FrictionAnchor],
    chi: f64,
    eps_v: f64,
    h: f64,
) -> Result<f64> {
    check_params(eps_v, h)?;
    let mut total = 0.0;
    for a in anchors {
        let u = tangential_velocity(a, x, x_prev, h);
        let (f, _, _) = mollifier(h * u.norm(), eps_v, h);
        total += chi * a.lambda * f;
    }
    Ok(total)
}

pub fn friction_gradient(
    x: &[Vec3],
    x_prev: &[Vec3],
    anchors: &[FrictionAnchor],
    chi: f64,
    eps_v: f64,
    h: f64,
) -> Result<Vec<Vec3>> {
    check_params(eps_v, h)?;
    let mut grad = crate::vecmath::zeros(x.len());
    for a in anchors {
        let u = tangential_velocity(a, x, x_prev, h);
        let un = u.norm();
        if un == 0.0 {
            continue; // f'(0) = 0
        }
        let (_, f1, _) = mollifier(h * un, eps_v, h);
        let dir = u / un;
        for k in 0..4 {
            grad[a.nodes[k]] += dir * (chi * a.lambda * f1 * a.coeff[k]);
        }
    }
    Ok(grad)
}

/// Eigen-projected per-pair friction Hessians.
pub fn friction_hessians(
    x: &[Vec3],
    x_prev: &[Vec3],
    anchors: &[FrictionAnchor],
    chi: f64,
    eps_v: f64,
    h: f64,
) -> Result<Vec<StencilHessian>> {
    check_params(eps_v, h)?;
    let out: Vec<StencilHessian> = anchors
        .par_iter()
        .map(|a| {
            let u = tangential_velocity(a, x, x_prev, h);
            let un = u.norm();
            let n = a.normal;
            let proj = Matrix3::identity() - n * n.transpose() / n.dot(&n);
            // H_core = f''(y) uhat uhat^T + (f'(y)/y) (P - uhat uhat^T), with
            // f'(y)/y -> 2/(eps_v h) as y -> 0.
            let y = h * un;
            let core = if un > 1e-14 {
                let (_, f1, f2) = mollifier(y, eps_v, h);
                let dir = u / un;
                let dd = dir * dir.transpose();
                dd * f2 + (proj - dd) * (f1 / y)
            } else {
                proj * (2.0 / (eps_v * h))
            };
            let mut hmat = DMatrix::<f64>::zeros(12, 12);
            for j in 0..4 {
                for k in 0..4 {
                    let w = chi * a.lambda * a.coeff[j] * a.coeff[k];
                    for r in 0..3 {
                        for c in 0..3 {
                            hmat[(3 * j + r, 3 * k + c)] = w * core[(r, c)];
                        }
                    }
                }
            }
            let (projected, eigenvalues) = project_psd(&hmat);
            StencilHessian {
                nodes: a.nodes.to_vec(),
                matrix: projected,
                eigenvalues,
            }
        })
        .collect();
    Ok(out)
}

/// Recompute anchors from the current iterate: normals and closest-point
/// weights from current geometry, lambda from the current barrier normal
/// force. Pairs whose distance reaches the offset carry no normal force and
/// are skipped; degenerate normals drop the pair.
pub fn update_friction_anchors(
    x: &[Vec3],
    pairs: &[ContactPair],
    sigma: f64,
    d_hat: f64,
) -> Result<Vec<FrictionAnchor>> {
    let mut anchors = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let p = ContactPair::evaluate(pair.topo, x)?;
        if p.eval.dist >= d_hat {
            continue;
        }
        let nn = p.eval.normal.norm();
        if !(nn.is_finite() && nn > 0.5) {
            // Degenerate normal; drop the pair.
            continue;
        }
        let lambda = sigma * barrier_d(p.eval.dist, d_hat)?.abs();
        anchors.push(FrictionAnchor {
            nodes: p.nodes(),
            coeff: p.eval.coeff,
            normal: p.eval.normal,
            lambda,
        });
    }
    Ok(anchors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::auglag::PairTopo;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn floor_anchor() -> FrictionAnchor {
        FrictionAnchor {
            nodes: [0, 1, 2, 3],
            coeff: [1.0, -0.3, -0.3, -0.4],
            normal: Vec3::z(),
            lambda: 2.0,
        }
    }

    #[test]
    fn zero_displacement_zero_potential() {
        let x = vec![Vec3::new(0.1, 0.2, 0.3); 4];
        let d = friction_potential(&x, &x, &[floor_anchor()], 0.5, 1e-3, 0.01).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn mollifier_at_threshold() {
        // y = eps_v h: f = (2/3) eps_v h and both branches agree.
        let (eps_v, h) = (1e-3, 0.01);
        let y = eps_v * h;
        let (f, f1, _) = mollifier(y, eps_v, h);
        assert!((f - 2.0 / 3.0 * y).abs() < 1e-18);
        assert!((f1 - 1.0).abs() < 1e-12);
        // Just past the threshold the linear branch continues with slope 1.
        let dy = y * 1e-9;
        let (f_hi, _, _) = mollifier(y + dy, eps_v, h);
        assert!((f_hi - (f + dy)).abs() < 1e-16);
    }

    #[test]
    fn potential_at_threshold_closed_form() {
        let (chi, eps_v, h) = (0.5, 1e-3, 0.01);
        let a = floor_anchor();
        let x_prev = vec![Vec3::zeros(); 4];
        // Vertex slides tangentially so that ||u h|| = eps_v h exactly.
        let mut x = x_prev.clone();
        x[0] = Vec3::new(eps_v * h, 0.0, 0.0);
        let d = friction_potential(&x, &x_prev, &[a], chi, eps_v, h).unwrap();
        let expected = chi * a.lambda * (2.0 / 3.0) * eps_v * h;
        assert!((d - expected).abs() < 1e-15 * expected, "{d} vs {expected}");
    }

    #[test]
    fn tangential_slide_ignores_normal_motion() {
        let a = floor_anchor();
        let x_prev = vec![Vec3::zeros(); 4];
        let mut x = x_prev.clone();
        x[0] = Vec3::new(0.002, 0.0, 0.005); // tangential + normal motion
        let u = tangential_velocity(&a, &x, &x_prev, 0.01);
        assert!(u.z.abs() < 1e-15);
        assert!((u.x - 0.2).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_fd_with_frozen_anchors() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let (chi, eps_v, h) = (0.6, 1e-3, 0.02);
        for _ in 0..10 {
            let anchors = vec![FrictionAnchor {
                nodes: [0, 1, 2, 3],
                coeff: [1.0, -0.25, -0.35, -0.4],
                normal: Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, 1.0).normalize(),
                lambda: 0.5 + rng.gen::<f64>(),
            }];
            let x_prev: Vec<Vec3> = (0..4)
                .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
                .collect();
            let x: Vec<Vec3> = x_prev
                .iter()
                .map(|p| p + Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 1e-4)
                .collect();
            let grad = friction_gradient(&x, &x_prev, &anchors, chi, eps_v, h).unwrap();
            let eps = 1e-9;
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..4 {
                for ax in 0..3 {
                    let mut xp = x.clone();
                    xp[i][ax] += eps;
                    let mut xm = x.clone();
                    xm[i][ax] -= eps;
                    let fd = (friction_potential(&xp, &x_prev, &anchors, chi, eps_v, h).unwrap()
                        - friction_potential(&xm, &x_prev, &anchors, chi, eps_v, h).unwrap())
                        / (2.0 * eps);
                    num += (grad[i][ax] - fd) * (grad[i][ax] - fd);
                    den += fd * fd;
                }
            }
            let rel = (num / den.max(1e-300)).sqrt();
            assert!(rel < 1e-4, "friction gradient FD rel err {rel}");
        }
    }

    #[test]
    fn hessian_psd_and_consistent_near_zero_velocity() {
        let anchors = vec![floor_anchor()];
        let x_prev = vec![Vec3::zeros(); 4];
        let x = x_prev.clone();
        let hs = friction_hessians(&x, &x_prev, &anchors, 0.5, 1e-3, 0.01).unwrap();
        let sym = nalgebra::SymmetricEigen::new(hs[0].matrix.clone());
        for &l in sym.eigenvalues.iter() {
            assert!(l >= -1e-10 * hs[0].matrix.norm().max(1.0));
        }
    }

    #[test]
    fn dissipation_nonnegative_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let anchors = vec![floor_anchor()];
        let x_prev = vec![Vec3::zeros(); 4];
        for _ in 0..50 {
            let mut x = x_prev.clone();
            for p in &mut x {
                *p = Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.01;
            }
            let d = friction_potential(&x, &x_prev, &anchors, 0.7, 1e-3, 0.01).unwrap();
            assert!(d >= 0.0);
        }
    }

    #[test]
    fn anchors_fixed_point_on_static_configuration() {
        let d_hat = 1e-3;
        let x = vec![
            Vec3::new(0.3, 0.25, 0.4e-3),
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let topo = PairTopo::VertexTriangle { v: 0, tri: [1, 2, 3] };
        let pair = ContactPair::evaluate(topo, &x).unwrap();
        let a1 = update_friction_anchors(&x, &[pair], 2.0, d_hat).unwrap();
        let a2 = update_friction_anchors(&x, &[pair], 2.0, d_hat).unwrap();
        assert_eq!(a1.len(), 1);
        assert_eq!(a1[0].lambda, a2[0].lambda);
        assert_eq!(a1[0].normal, a2[0].normal);
        assert_eq!(a1[0].coeff, a2[0].coeff);
    }

    #[test]
    fn invalid_eps_v_rejected() {
        let x = vec![Vec3::zeros(); 4];
        assert!(friction_potential(&x, &x, &[], 0.5, 0.0, 0.01).is_err());
    }
}
