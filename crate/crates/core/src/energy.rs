//! Elastic strain energies, the inertia term of the Incremental Potential,
//! and their gradients and SPD-projected per-stencil Hessians.
//!
//! Two material models are provided:
//! - `StableNeoHookean`: an inversion-robust polynomial Neo-Hookean variant,
//!   Psi = mu/2 (I_C - 3) - mu (J - 1) + lambda/2 (J - 1)^2
//!   with I_C = ||F||_F^2 and J = det F. Finite for inverted elements.
//! - `Arap`: Psi = mu/2 ||F - R(F)||_F^2 with R the closest rotation from the
//!   polar decomposition of F.
//!
//! Per-tet 12x12 Hessians are eigen-projected to PSD by clamping negative
//! eigenvalues to zero (symmetric Jacobi iteration on the dense block).

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;

use crate::error::SimError;
use crate::mesh::SimMesh;
use crate::vecmath::Vec3;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    StableNeoHookean,
    Arap,
}

/// Elastic material with Lame parameters derived from (E, nu).
#[derive(Debug, Clone, Copy)]
pub struct ElasticModel {
    pub kind: ModelKind,
    pub mu: f64,
    pub lambda: f64,
}

impl ElasticModel {
    pub fn new(kind: ModelKind, young: f64, poisson: f64) -> Result<Self> {
        if young <= 0.0 || !(0.0..0.5).contains(&poisson) {
            return Err(SimError::Invalid(format!(
                "invalid material parameters E={young}, nu={poisson}"
            )));
        }
        let mu = young / (2.0 * (1.0 + poisson));
        let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
        Ok(ElasticModel { kind, mu, lambda })
    }
}

/// A dense symmetric PSD block over a small set of nodes.
#[derive(Debug, Clone)]
pub struct StencilHessian {
    pub nodes: Vec<usize>,
    /// 3k x 3k, symmetric, PSD after projection.
    pub matrix: DMatrix<f64>,
    /// Eigenvalues after clamping (all >= 0).
    pub eigenvalues: Vec<f64>,
}

impl StencilHessian {
    /// Mean of the stored (post-projection) eigenvalues.
    pub fn mean_eigenvalue(&self) -> f64 {
        if self.eigenvalues.is_empty() {
            0.0
        } else {
            self.eigenvalues.iter().sum::<f64>() / self.eigenvalues.len() as f64
        }
    }
}

// ---------------------------------------------------------------------------
// Inertia term

/// (1/2h^2) sum_j m_j ||x_j - y_j||^2
pub fn inertia_energy(x: &[Vec3], y: &[Vec3], masses: &[f64], h: f64) -> f64 {
    let inv = 1.0 / (2.0 * h * h);
    x.iter()
        .zip(y)
        .zip(masses)
        .map(|((xi, yi), &m)| m * (xi - yi).norm_squared())
        .sum::<f64>()
        * inv
}

/// M (x - y) / h^2
pub fn inertia_gradient(x: &[Vec3], y: &[Vec3], masses: &[f64], h: f64) -> Vec<Vec3> {
    let inv = 1.0 / (h * h);
    x.iter()
        .zip(y)
        .zip(masses)
        .map(|((xi, yi), &m)| (xi - yi) * (m * inv))
        .collect()
}

// ---------------------------------------------------------------------------
// Per-tet kinematics

/// Precomputed rest-shape data for one tet: inverse shape matrix and volume.
#[derive(Debug, Clone, Copy)]
struct TetRef {
    bm: Matrix3<f64>,
    volume: f64,
}

fn tet_ref(mesh: &SimMesh, ti: usize) -> TetRef {
    let t = mesh.tets[ti];
    let a = mesh.rest_positions[t[0]];
    let dm = Matrix3::from_columns(&[
        mesh.rest_positions[t[1]] - a,
        mesh.rest_positions[t[2]] - a,
        mesh.rest_positions[t[3]] - a,
    ]);
    TetRef {
        bm: dm.try_inverse().expect("validated mesh has invertible rest shapes"),
        volume: dm.determinant() / 6.0,
    }
}

fn deformation_gradient(x: &[Vec3], tet: &[usize; 4], bm: &Matrix3<f64>) -> Matrix3<f64> {
    let a = x[tet[0]];
    let ds = Matrix3::from_columns(&[x[tet[1]] - a, x[tet[2]] - a, x[tet[3]] - a]);
    ds * bm
}

fn cofactor(f: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = f.column(1).cross(&f.column(2));
    let c1 = f.column(2).cross(&f.column(0));
    let c2 = f.column(0).cross(&f.column(1));
    Matrix3::from_columns(&[c0, c1, c2])
}

/// Closest rotation to `f` via SVD, with reflection fixed to det = +1.
fn polar_rotation(f: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = f.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        // Flip the axis of the smallest singular value.
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    r
}

fn psi(model: &ElasticModel, f: &Matrix3<f64>) -> f64 {
    match model.kind {
        ModelKind::StableNeoHookean => {
            let ic = f.norm_squared();
            let j = f.determinant();
            0.5 * model.mu * (ic - 3.0) - model.mu * (j - 1.0)
                + 0.5 * model.lambda * (j - 1.0) * (j - 1.0)
        }
        ModelKind::Arap => {
            let r = polar_rotation(f);
            0.5 * model.mu * (f - r).norm_squared()
        }
    }
}

/// First Piola-Kirchhoff stress dPsi/dF.
fn piola(model: &ElasticModel, f: &Matrix3<f64>) -> Matrix3<f64> {
    match model.kind {
        ModelKind::StableNeoHookean => {
            let j = f.determinant();
            let g = cofactor(f);
            f * model.mu + g * (model.lambda * (j - 1.0) - model.mu)
        }
        ModelKind::Arap => (f - polar_rotation(f)) * model.mu,
    }
}

/// Node-weight matrix mapping dF to nodal displacements: row i holds the
/// coefficient of node i for each column of F.
fn shape_weights(bm: &Matrix3<f64>) -> [[f64; 3]; 4] {
    let mut g = [[0.0; 3]; 4];
    for b in 0..3 {
        let mut s = 0.0;
        for k in 0..3 {
            g[k + 1][b] = bm[(k, b)];
            s += bm[(k, b)];
        }
        g[0][b] = -s;
    }
    g
}

fn scatter_piola(p: &Matrix3<f64>, bm: &Matrix3<f64>, volume: f64) -> [Vec3; 4] {
    // grad(node k+1) = volume * P * Bm^T e_k ; node 0 closes the sum.
    let h3 = p * bm.transpose() * volume;
    let g1 = Vec3::new(h3[(0, 0)], h3[(1, 0)], h3[(2, 0)]);
    let g2 = Vec3::new(h3[(0, 1)], h3[(1, 1)], h3[(2, 1)]);
    let g3 = Vec3::new(h3[(0, 2)], h3[(1, 2)], h3[(2, 2)]);
    [-(g1 + g2 + g3), g1, g2, g3]
}

/// d2Psi/dF2 as a 9x9 over vec(F) = (f0; f1; f2), Stable Neo-Hookean only.
fn snh_hessian_ff(model: &ElasticModel, f: &Matrix3<f64>) -> DMatrix<f64> {
    let j = f.determinant();
    let g = cofactor(f);
    let mut a = DMatrix::<f64>::zeros(9, 9);
    for i in 0..9 {
        a[(i, i)] = model.mu;
    }
    // lambda * vec(g) vec(g)^T
    let gv: Vec<f64> = (0..9).map(|i| g[(i % 3, i / 3)]).collect();
    for r in 0..9 {
        for c in 0..9 {
            a[(r, c)] += model.lambda * gv[r] * gv[c];
        }
    }
    // (lambda (J-1) - mu) * d2J/dF2, built from cross-product blocks.
    let s = model.lambda * (j - 1.0) - model.mu;
    let f0 = f.column(0).into_owned();
    let f1 = f.column(1).into_owned();
    let f2 = f.column(2).into_owned();
    let cross = |v: &Vec3| Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0);
    let blocks: [(usize, usize, Matrix3<f64>); 6] = [
        (0, 1, -cross(&f2)),
        (0, 2, cross(&f1)),
        (1, 0, cross(&f2)),
        (1, 2, -cross(&f0)),
        (2, 0, -cross(&f1)),
        (2, 1, cross(&f0)),
    ];
    for (bi, bj, m) in blocks {
        for r in 0..3 {
            for c in 0..3 {
                a[(3 * bi + r, 3 * bj + c)] += s * m[(r, c)];
            }
        }
    }
    a
}

/// Map a 9x9 dF-space Hessian to the 12x12 nodal Hessian.
fn hessian_ff_to_nodes(a: &DMatrix<f64>, bm: &Matrix3<f64>, volume: f64) -> DMatrix<f64> {
    let g = shape_weights(bm);
    // T[(3i+r), (r+3b)] = g[i][b]
    let mut t = DMatrix::<f64>::zeros(12, 9);
    for i in 0..4 {
        for b in 0..3 {
            for r in 0..3 {
                t[(3 * i + r, r + 3 * b)] = g[i][b];
            }
        }
    }
    (&t * a * t.transpose()) * volume
}

/// Central finite difference of the analytic per-tet gradient; used for the
/// ARAP Hessian where the rotation derivative has no compact closed form.
fn fd_tet_hessian(
    model: &ElasticModel,
    tet: &[usize; 4],
    bm: &Matrix3<f64>,
    volume: f64,
    x: &[Vec3],
) -> DMatrix<f64> {
    let mut h = DMatrix::<f64>::zeros(12, 12);
    let scale = tet.iter().map(|&v| x[v].norm()).fold(1.0, f64::max);
    let eps = 1e-6 * scale;
    let mut xp: Vec<Vec3> = tet.iter().map(|&v| x[v]).collect();
    let local_grad = |pts: &[Vec3]| -> [Vec3; 4] {
        let a = pts[0];
        let ds = Matrix3::from_columns(&[pts[1] - a, pts[2] - a, pts[3] - a]);
        let f = ds * bm;
        scatter_piola(&(piola(model, &f)), bm, volume)
    };
    for col in 0..12 {
        let (node, axis) = (col / 3, col % 3);
        let orig = xp[node][axis];
        xp[node][axis] = orig + eps;
        let gp = local_grad(&xp);
        xp[node][axis] = orig - eps;
        let gm = local_grad(&xp);
        xp[node][axis] = orig;
        for row_node in 0..4 {
            for r in 0..3 {
                h[(3 * row_node + r, col)] = (gp[row_node][r] - gm[row_node][r]) / (2.0 * eps);
            }
        }
    }
    // Symmetrize away finite-difference noise.
    let ht = h.transpose();
    (h + ht) * 0.5
}

// ---------------------------------------------------------------------------
// Symmetric Jacobi eigensolver and PSD projection

/// Cyclic Jacobi iteration for a dense symmetric matrix.
/// Returns (eigenvalues, eigenvectors-as-columns).
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-14 * (a.norm() + 1.0) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eigvals: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    (eigvals, v)
}

/// Clamp negative eigenvalues to zero and rebuild V [lambda] V^T.
pub fn project_psd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (vals, vecs) = jacobi_eigen(m);
    let clamped: Vec<f64> = vals.iter().map(|&l| l.max(0.0)).collect();
    let n = m.nrows();
    let mut out = DMatrix::<f64>::zeros(n, n);
    for (k, &l) in clamped.iter().enumerate() {
        if l > 0.0 {
            let col = vecs.column(k);
            for r in 0..n {
                for c in 0..n {
                    out[(r, c)] += l * col[r] * col[c];
                }
            }
        }
    }
    (out, clamped)
}

// ---------------------------------------------------------------------------
// Public per-mesh evaluation

fn check_models(models: &[ElasticModel], mesh: &SimMesh) -> Result<()> {
    if models.len() != mesh.tets.len() {
        return Err(SimError::Invalid(format!(
            "expected {} per-tet models, got {}",
            mesh.tets.len(),
            models.len()
        )));
    }
    Ok(())
}

fn check_positions(x: &[Vec3]) -> Result<()> {
    if !crate::vecmath::is_finite(x) {
        return Err(SimError::NonFinitePositions);
    }
    Ok(())
}

pub fn elastic_energy(models: &[ElasticModel], mesh: &SimMesh, x: &[Vec3]) -> Result<f64> {
    check_models(models, mesh)?;
    check_positions(x)?;
    let per_tet: Vec<f64> = (0..mesh.tets.len())
        .into_par_iter()
        .map(|ti| {
            let r = tet_ref(mesh, ti);
            let f = deformation_gradient(x, &mesh.tets[ti], &r.bm);
            r.volume * psi(&models[ti], &f)
        })
        .collect();
    // Sequential accumulation keeps results bit-identical across runs.
    Ok(per_tet.iter().sum())
}

pub fn elastic_gradient(models: &[ElasticModel], mesh: &SimMesh, x: &[Vec3]) -> Result<Vec<Vec3>> {
    check_models(models, mesh)?;
    check_positions(x)?;
    let per_tet: Vec<[Vec3; 4]> = (0..mesh.tets.len())
        .into_par_iter()
        .map(|ti| {
            let r = tet_ref(mesh, ti);
            let f = deformation_gradient(x, &mesh.tets[ti], &r.bm);
            scatter_piola(&piola(&models[ti], &f), &r.bm, r.volume)
        })
        .collect();
    let mut grad = crate::vecmath::zeros(mesh.node_count());
    for (ti, g) in per_tet.iter().enumerate() {
        for (k, &v) in mesh.tets[ti].iter().enumerate() {
            grad[v] += g[k];
        }
    }
    Ok(grad)
}

/// Per-tet 12x12 Hessians, eigen-projected to PSD.
pub fn elastic_hessian_projected(
    models: &[ElasticModel],
    mesh: &SimMesh,
    x: &[Vec3],
) -> Result<Vec<StencilHessian>> {
    check_models(models, mesh)?;
    check_positions(x)?;
    let out: Vec<StencilHessian> = (0..mesh.tets.len())
        .into_par_iter()
        .map(|ti| {
            let r = tet_ref(mesh, ti);
            let raw = elastic_tet_hessian_raw(&models[ti], mesh, ti, &r, x);
            let (projected, eigenvalues) = project_psd(&raw);
            StencilHessian {
                nodes: mesh.tets[ti].to_vec(),
                matrix: projected,
                eigenvalues,
            }
        })
        .collect();
    Ok(out)
}

/// Unprojected 12x12 nodal Hessian of one tet (test oracle hook).
pub fn elastic_tet_hessian_unprojected(
    model: &ElasticModel,
    mesh: &SimMesh,
    ti: usize,
    x: &[Vec3],
) -> DMatrix<f64> {
    let r = tet_ref(mesh, ti);
    elastic_tet_hessian_raw(model, mesh, ti, &r, x)
}

fn elastic_tet_hessian_raw(
    model: &ElasticModel,
    mesh: &SimMesh,
    ti: usize,
    r: &TetRef,
    x: &[Vec3],
) -> DMatrix<f64> {
    match model.kind {
        ModelKind::StableNeoHookean => {
            let f = deformation_gradient(x, &mesh.tets[ti], &r.bm);
            let a = snh_hessian_ff(model, &f);
            hessian_ff_to_nodes(&a, &r.bm, r.volume)
        }
        ModelKind::Arap => fd_tet_hessian(model, &mesh.tets[ti], &r.bm, r.volume, x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SimMesh;
    use nalgebra::DVector;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_tet() -> SimMesh {
        let pos = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        SimMesh::from_parts(pos, vec![[0, 1, 2, 3]], 1000.0).unwrap()
    }

    fn snh() -> ElasticModel {
        ElasticModel::new(ModelKind::StableNeoHookean, 1e5, 0.4).unwrap()
    }

    fn arap() -> ElasticModel {
        ElasticModel::new(ModelKind::Arap, 1e5, 0.4).unwrap()
    }

    fn perturbed(mesh: &SimMesh, rng: &mut impl Rng, amp: f64) -> Vec<Vec3> {
        mesh.rest_positions
            .iter()
            .map(|p| p + Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * amp)
            .collect()
    }

    #[test]
    fn inertia_zero_at_predictor() {
        let x = vec![Vec3::new(1.0, 2.0, 3.0)];
        assert_eq!(inertia_energy(&x, &x, &[2.0], 0.01), 0.0);
    }

    #[test]
    fn inertia_closed_form() {
        let x = vec![Vec3::new(1.0, 0.0, 0.0)];
        let y = vec![Vec3::zeros()];
        assert!((inertia_energy(&x, &y, &[2.0], 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inertia_gradient_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 5;
        let x: Vec<Vec3> = (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let y: Vec<Vec3> = (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let m: Vec<f64> = (0..n).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let h = 0.02;
        let grad = inertia_gradient(&x, &y, &m, h);
        let eps = 1e-6;
        for i in 0..n {
            for a in 0..3 {
                let mut xp = x.clone();
                xp[i][a] += eps;
                let mut xm = x.clone();
                xm[i][a] -= eps;
                let fd = (inertia_energy(&xp, &y, &m, h) - inertia_energy(&xm, &y, &m, h)) / (2.0 * eps);
                let rel = (grad[i][a] - fd).abs() / fd.abs().max(1e-8);
                assert!(rel < 1e-6, "node {i} axis {a}: {} vs {}", grad[i][a], fd);
            }
        }
    }

    #[test]
    fn rest_state_is_minimum() {
        let mesh = unit_tet();
        for model in [snh(), arap()] {
            let models = vec![model; 1];
            let x = mesh.rest_positions.clone();
            let e = elastic_energy(&models, &mesh, &x).unwrap();
            assert!(e.abs() < 1e-12, "rest energy {e}");
            let g = elastic_gradient(&models, &mesh, &x).unwrap();
            let gn = crate::vecmath::norm(&g);
            assert!(gn < 1e-10 * model.mu, "rest gradient norm {gn}");
        }
    }

    #[test]
    fn arap_scaling_energy_and_fd_gradient() {
        let mesh = unit_tet();
        let models = vec![arap(); 1];
        let x: Vec<Vec3> = mesh.rest_positions.iter().map(|p| p * 1.1).collect();
        let e = elastic_energy(&models, &mesh, &x).unwrap();
        assert!(e > 0.0);
        check_gradient_fd(&models, &mesh, &x, 1e-4);
    }

    fn check_gradient_fd(models: &[ElasticModel], mesh: &SimMesh, x: &[Vec3], tol: f64) {
        let grad = elastic_gradient(models, mesh, x).unwrap();
        let eps = 1e-6;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..x.len() {
            for a in 0..3 {
                let mut xp = x.to_vec();
                xp[i][a] += eps;
                let mut xm = x.to_vec();
                xm[i][a] -= eps;
                let fd = (elastic_energy(models, mesh, &xp).unwrap()
                    - elastic_energy(models, mesh, &xm).unwrap())
                    / (2.0 * eps);
                num += (grad[i][a] - fd) * (grad[i][a] - fd);
                den += fd * fd;
            }
        }
        let rel = (num / den.max(1e-300)).sqrt();
        assert!(rel < tol, "gradient FD rel err {rel}");
    }

    #[test]
    fn snh_gradient_matches_fd_on_random_configs() {
        let mesh = unit_tet();
        let models = vec![snh(); 1];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let x = perturbed(&mesh, &mut rng, 0.3);
            check_gradient_fd(&models, &mesh, &x, 1e-4);
        }
    }

    #[test]
    fn snh_finite_under_inversion() {
        let mesh = unit_tet();
        let models = vec![snh(); 1];
        // Collapse node 3 through the opposite face: inverted configuration.
        let mut x = mesh.rest_positions.clone();
        x[3] = Vec3::new(0.3, 0.3, -0.5);
        let e = elastic_energy(&models, &mesh, &x).unwrap();
        assert!(e.is_finite());
        check_gradient_fd(&models, &mesh, &x, 1e-4);
    }

    #[test]
    fn hessian_consistent_with_gradient_fd() {
        // Directional FD of the gradient vs unprojected Hessian-vector product.
        let mesh = unit_tet();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for model in [snh(), arap()] {
            let models = vec![model; 1];
            let x = perturbed(&mesh, &mut rng, 0.2);
            let h = elastic_tet_hessian_unprojected(&model, &mesh, 0, &x);
            let dir: Vec<f64> = (0..12).map(|_| rng.gen::<f64>() - 0.5).collect();
            let d = DVector::from_vec(dir.clone());
            let hv = &h * &d;
            let eps = 1e-6;
            let shift = |sign: f64| -> Vec<Vec3> {
                let mut xs = x.clone();
                for (k, &v) in mesh.tets[0].iter().enumerate() {
                    xs[v] += Vec3::new(dir[3 * k], dir[3 * k + 1], dir[3 * k + 2]) * (sign * eps);
                }
                xs
            };
            let gp = elastic_gradient(&models, &mesh, &shift(1.0)).unwrap();
            let gm = elastic_gradient(&models, &mesh, &shift(-1.0)).unwrap();
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, &v) in mesh.tets[0].iter().enumerate() {
                for a in 0..3 {
                    let fd = (gp[v][a] - gm[v][a]) / (2.0 * eps);
                    let diff = fd - hv[3 * k + a];
                    num += diff * diff;
                    den += fd * fd;
                }
            }
            let rel = (num / den.max(1e-300)).sqrt();
            assert!(rel < 1e-4, "{:?}: Hv vs FD rel err {rel}", model.kind);
        }
    }

    #[test]
    fn projected_hessian_is_psd_by_dense_eigensolver() {
        // Oracle: nalgebra's SymmetricEigen, independent of the Jacobi path.
        let mesh = unit_tet();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in [snh(), arap()] {
            for _ in 0..5 {
                let x = perturbed(&mesh, &mut rng, 0.5);
                let hs = elastic_hessian_projected(&[model], &mesh, &x).unwrap();
                for sh in &hs {
                    let sym = nalgebra::SymmetricEigen::new(sh.matrix.clone());
                    let hnorm = sh.matrix.norm();
                    for &l in sym.eigenvalues.iter() {
                        assert!(l >= -1e-10 * hnorm.max(1.0), "eig {l} vs norm {hnorm}");
                    }
                }
            }
        }
    }

    #[test]
    fn translation_and_rotation_invariance() {
        let mesh = unit_tet();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = perturbed(&mesh, &mut rng, 0.2);
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        for model in [snh(), arap()] {
            let models = vec![model; 1];
            let e0 = elastic_energy(&models, &mesh, &x).unwrap();
            let shifted: Vec<Vec3> = x.iter().map(|p| p + Vec3::new(3.0, -2.0, 0.5)).collect();
            let rotated: Vec<Vec3> = x.iter().map(|p| rot * p).collect();
            let es = elastic_energy(&models, &mesh, &shifted).unwrap();
            let er = elastic_energy(&models, &mesh, &rotated).unwrap();
            assert!((es - e0).abs() <= 1e-10 * e0.abs().max(1.0));
            assert!((er - e0).abs() <= 1e-10 * e0.abs().max(1.0));
        }
    }

    #[test]
    fn nan_positions_rejected() {
        let mesh = unit_tet();
        let mut x = mesh.rest_positions.clone();
        x[1].x = f64::NAN;
        assert!(matches!(
            elastic_energy(&[snh()], &mesh, &x),
            Err(SimError::NonFinitePositions)
        ));
    }

    #[test]
    fn jacobi_eigen_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [3usize, 7, 12] {
            let m0 = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
            let m = &m0 + m0.transpose();
            let (mut vals, _) = jacobi_eigen(&m);
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut oracle: Vec<f64> = nalgebra::SymmetricEigen::new(m.clone())
                .eigenvalues
                .iter()
                .copied()
                .collect();
            oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in vals.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-9 * m.norm().max(1.0), "{a} vs {b}");
            }
        }
    }
}
