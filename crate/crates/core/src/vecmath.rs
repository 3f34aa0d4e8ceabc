//! Helpers for stacked nodal vectors stored as `Vec<Vector3<f64>>`.

use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Dot product of two stacked nodal vectors, accumulated in index order.
pub fn dot(a: &[Vec3], b: &[Vec3]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x.dot(y);
    }
    acc
}

/// Euclidean norm of a stacked nodal vector.
pub fn norm(a: &[Vec3]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += s * x`
pub fn axpy(s: f64, x: &[Vec3], y: &mut [Vec3]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// `out = a + s * b`
pub fn add_scaled(a: &[Vec3], s: f64, b: &[Vec3]) -> Vec<Vec3> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn zeros(n: usize) -> Vec<Vec3> {
    vec![Vec3::zeros(); n]
}

pub fn is_finite(a: &[Vec3]) -> bool {
    a.iter().all(|v| v.x.is_finite() && v.y.is_finite() && v.z.is_finite())
}
