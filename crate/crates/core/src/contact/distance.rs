//! Minimum distances between surface primitives with closest-point weights.
//!
//! Classification degrades VF -> VE -> VV and EE -> VE/VV when the closest
//! point lands on the boundary of a simplex (barycentric boundary tolerance
//! 1e-10). The signed weight vector `coeff` gives the exact distance gradient
//! via the envelope theorem: grad d at node k equals `coeff[k] * normal`.

use crate::error::SimError;
use crate::vecmath::Vec3;
use crate::Result;

/// Pair classification after closest-point degeneration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    VF,
    EE,
    VE,
    VV,
}

/// Barycentric boundary tolerance deciding reclassification.
const BOUNDARY_TOL: f64 = 1e-10;

/// Closest-point data for one primitive pair over 4 stencil nodes.
#[derive(Debug, Clone, Copy)]
pub struct DistanceResult {
    pub kind: PairKind,
    /// Minimum Euclidean distance (always > 0).
    pub dist: f64,
    /// Signed closest-point weights: the difference vector is
    /// `sum_k coeff[k] * x_k`, positive on the first primitive.
    pub coeff: [f64; 4],
    /// Unit vector from the second primitive's closest point toward the
    /// first's. The contact normal for VF/EE; the separation direction for
    /// degenerate kinds.
    pub normal: Vec3,
}

impl DistanceResult {
    /// Orthonormal tangent basis spanning the plane orthogonal to `normal`.
    pub fn tangent_basis(&self) -> [Vec3; 2] {
        let n = self.normal;
        let a = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let t0 = n.cross(&a).normalize();
        let t1 = n.cross(&t0);
        [t0, t1]
    }
}

fn finish(kind: PairKind, p: Vec3, q: Vec3, coeff: [f64; 4]) -> Result<DistanceResult> {
    let diff = p - q;
    let dist = diff.norm();
    if dist <= 0.0 {
        return Err(SimError::CoincidentPrimitives);
    }
    Ok(DistanceResult {
        kind,
        dist,
        coeff,
        normal: diff / dist,
    })
}

/// Closest point on triangle `t` to point `p` (Ericson-style region tests).
/// Returns barycentrics (w0, w1, w2) of the closest point.
fn closest_point_triangle(p: Vec3, t: [Vec3; 3]) -> (f64, f64, f64) {
    let ab = t[1] - t[0];
    let ac = t[2] - t[0];
    let ap = p - t[0];
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    let bp = p - t[1];
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (0.0, 1.0, 0.0);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (1.0 - v, v, 0.0);
    }
    let cp = p - t[2];
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (0.0, 0.0, 1.0);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (1.0 - w, 0.0, w);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (0.0, 1.0 - w, w);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (1.0 - v - w, v, w)
}

/// Vertex-triangle distance; stencil order `[v, t0, t1, t2]`.
pub fn vf_distance(p: Vec3, t: [Vec3; 3]) -> Result<DistanceResult> {
    let (w0, w1, w2) = closest_point_triangle(p, t);
    let interior = [w0, w1, w2].iter().filter(|&&w| w > BOUNDARY_TOL).count();
    let kind = match interior {
        3 => PairKind::VF,
        2 => PairKind::VE,
        _ => PairKind::VV,
    };
    let q = t[0] * w0 + t[1] * w1 + t[2] * w2;
    finish(kind, p, q, [1.0, -w0, -w1, -w2])
}

/// Closest points of segments `a0a1` and `b0b1`; returns parameters (s, u).
fn closest_segment_segment(a0: Vec3, a1: Vec3, b0: Vec3, b1: Vec3) -> (f64, f64) {
    let d1 = a1 - a0;
    let d2 = b1 - b0;
    let r = a0 - b0;
    let a = d1.norm_squared();
    let e = d2.norm_squared();
    let f = d2.dot(&r);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return (0.0, 0.0);
    }
    if a <= f64::EPSILON {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(&r);
    if e <= f64::EPSILON {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 0.0 {
        ((b * f - c * e) / denom).clamp(0.0, 1.0)
    } else {
        // Parallel edges: pick the overlap midpoint parameter on segment a.
        parallel_overlap_param(a0, a1, b0, b1)
    };
    let mut u = (b * s + f) / e;
    if u < 0.0 {
        u = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if u > 1.0 {
        u = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, u)
}

/// For parallel segments the closest pair is non-unique; use the midpoint of
/// the projected overlap so results are deterministic and symmetric.
fn parallel_overlap_param(a0: Vec3, a1: Vec3, b0: Vec3, b1: Vec3) -> f64 {
    let d1 = a1 - a0;
    let len2 = d1.norm_squared();
    let t0 = (b0 - a0).dot(&d1) / len2;
    let t1 = (b1 - a0).dot(&d1) / len2;
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    let lo_c = lo.clamp(0.0, 1.0);
    let hi_c = hi.clamp(0.0, 1.0);
    if lo_c <= hi_c {
        0.5 * (lo_c + hi_c)
    } else {
        lo_c
    }
}

/// Edge-edge distance; stencil order `[a0, a1, b0, b1]`.
pub fn ee_distance(a: [Vec3; 2], b: [Vec3; 2]) -> Result<DistanceResult> {
    let (s, u) = closest_segment_segment(a[0], a[1], b[0], b[1]);
    let s_interior = s > BOUNDARY_TOL && s < 1.0 - BOUNDARY_TOL;
    let u_interior = u > BOUNDARY_TOL && u < 1.0 - BOUNDARY_TOL;
    let kind = match (s_interior, u_interior) {
        (true, true) => PairKind::EE,
        (false, false) => PairKind::VV,
        _ => PairKind::VE,
    };
    let p = a[0] * (1.0 - s) + a[1] * s;
    let q = b[0] * (1.0 - u) + b[1] * u;
    finish(kind, p, q, [1.0 - s, s, -(1.0 - u), -u])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_above_triangle_interior() {
        let t = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let r = vf_distance(Vec3::new(0.25, 0.25, 1.0), t).unwrap();
        assert_eq!(r.kind, PairKind::VF);
        assert!((r.dist - 1.0).abs() < 1e-12);
        assert!((r.normal - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn vertex_above_triangle_corner_degrades_to_vv() {
        // Closest point is the corner (0,0,0): barycentric boundary on two axes.
        let t = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let r = vf_distance(Vec3::new(0.0, 0.0, 1.0), t).unwrap();
        assert_eq!(r.kind, PairKind::VV);
        assert!((r.dist - 1.0).abs() < 1e-12);
        assert_eq!(r.coeff, [1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn vertex_beyond_edge_degrades_to_ve() {
        let t = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let r = vf_distance(Vec3::new(0.5, -1.0, 0.0), t).unwrap();
        assert_eq!(r.kind, PairKind::VE);
        assert!((r.dist - 1.0).abs() < 1e-12);
    }

    #[test]
    fn parallel_unit_edges() {
        let r = ee_distance(
            [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)],
            [Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 1.0, 0.0)],
        )
        .unwrap();
        assert!((r.dist - 1.0).abs() < 1e-12);
        assert_eq!(r.kind, PairKind::EE);
    }

    #[test]
    fn crossing_skew_edges() {
        let r = ee_distance(
            [Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)],
            [Vec3::new(0.0, -1.0, 0.5), Vec3::new(0.0, 1.0, 0.5)],
        )
        .unwrap();
        assert_eq!(r.kind, PairKind::EE);
        assert!((r.dist - 0.5).abs() < 1e-12);
        assert!((r.normal - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn coincident_points_error() {
        let t = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        assert!(matches!(
            vf_distance(Vec3::new(0.25, 0.25, 0.0), t),
            Err(SimError::CoincidentPrimitives)
        ));
    }

    /// Brute-force oracle: sample the barycentric domains on a dense grid.
    fn grid_min_vf(p: Vec3, t: [Vec3; 3], n: usize) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let w1 = i as f64 / n as f64;
                let w2 = j as f64 / n as f64;
                let q = t[0] * (1.0 - w1 - w2) + t[1] * w1 + t[2] * w2;
                best = best.min((p - q).norm());
            }
        }
        best
    }

    fn grid_min_ee(a: [Vec3; 2], b: [Vec3; 2], n: usize) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=n {
            for j in 0..=n {
                let s = i as f64 / n as f64;
                let u = j as f64 / n as f64;
                let p = a[0] * (1.0 - s) + a[1] * s;
                let q = b[0] * (1.0 - u) + b[1] * u;
                best = best.min((p - q).norm());
            }
        }
        best
    }

    #[test]
    fn random_pairs_match_grid_search() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let rv = |rng: &mut rand_chacha::ChaCha8Rng| {
            Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        };
        for _ in 0..30 {
            let p = rv(&mut rng) + Vec3::new(0.0, 0.0, 1.0);
            let t = [rv(&mut rng), rv(&mut rng), rv(&mut rng)];
            if let Ok(r) = vf_distance(p, t) {
                let oracle = grid_min_vf(p, t, 400);
                assert!((r.dist - oracle).abs() < 1e-5, "{} vs {}", r.dist, oracle);
                assert!(r.dist <= oracle + 1e-12);
            }
            let a = [rv(&mut rng), rv(&mut rng)];
            let b = [rv(&mut rng) + Vec3::new(0.0, 0.0, 1.0), rv(&mut rng) + Vec3::new(0.0, 0.0, 1.0)];
            if let Ok(r) = ee_distance(a, b) {
                let oracle = grid_min_ee(a, b, 400);
                assert!((r.dist - oracle).abs() < 1e-5, "{} vs {}", r.dist, oracle);
                assert!(r.dist <= oracle + 1e-12);
            }
        }
    }

    #[test]
    fn coeff_gradient_matches_fd() {
        // Envelope theorem: grad d at node k = coeff[k] * normal.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let rv = |rng: &mut rand_chacha::ChaCha8Rng| {
            Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        };
        let eps = 1e-7;
        for _ in 0..20 {
            let pts = [
                rv(&mut rng) + Vec3::new(0.0, 0.0, 1.5),
                rv(&mut rng),
                rv(&mut rng),
                rv(&mut rng),
            ];
            let eval = |pts: &[Vec3; 4]| vf_distance(pts[0], [pts[1], pts[2], pts[3]]).unwrap();
            let r = eval(&pts);
            for k in 0..4 {
                for axis in 0..3 {
                    let mut pp = pts;
                    pp[k][axis] += eps;
                    let mut pm = pts;
                    pm[k][axis] -= eps;
                    let fd = (eval(&pp).dist - eval(&pm).dist) / (2.0 * eps);
                    let analytic = r.coeff[k] * r.normal[axis];
                    assert!(
                        (fd - analytic).abs() < 1e-5,
                        "node {k} axis {axis}: fd {fd} vs {analytic}"
                    );
                }
            }
        }
    }

    #[test]
    fn tangent_basis_orthonormal() {
        let t = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let r = vf_distance(Vec3::new(0.2, 0.3, 0.7), t).unwrap();
        let [t0, t1] = r.tangent_basis();
        assert!(t0.dot(&r.normal).abs() < 1e-12);
        assert!(t1.dot(&r.normal).abs() < 1e-12);
        assert!(t0.dot(&t1).abs() < 1e-12);
        assert!((t0.norm() - 1.0).abs() < 1e-12);
        assert!((t1.norm() - 1.0).abs() < 1e-12);
    }
}
