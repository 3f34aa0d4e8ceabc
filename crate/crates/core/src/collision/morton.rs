//! 30-bit Morton codes: 10 bits per axis, interleaved x, y, z.

use super::aabb::Aabb;
use crate::vecmath::Vec3;

/// Spread the low 10 bits of `v` so consecutive bits land 3 apart.
fn expand_bits(v: u32) -> u32 {
    let mut v = v & 0x3ff;
    v = (v | (v << 16)) & 0x030000ff;
    v = (v | (v << 8)) & 0x0300f00f;
    v = (v | (v << 4)) & 0x030c30c3;
    v = (v | (v << 2)) & 0x09249249;
    v
}

/// Quantize `p` into the scene box at 10 bits per axis and interleave.
/// Points outside the box are clamped.
pub fn morton_encode(p: Vec3, scene_box: &Aabb) -> u32 {
    let extent = scene_box.max - scene_box.min;
    let mut q = [0u32; 3];
    for a in 0..3 {
        let e = extent[a];
        let t = if e > 0.0 {
            ((p[a] - scene_box.min[a]) / e).clamp(0.0, 1.0)
        } else {
            0.0
        };
        q[a] = ((t * 1024.0) as u32).min(1023);
    }
    (expand_bits(q[0]) << 2) | (expand_bits(q[1]) << 1) | expand_bits(q[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> Aabb {
        Aabb::from_points(&[Vec3::zeros(), Vec3::repeat(1.0)])
    }

    #[test]
    fn box_min_is_zero() {
        assert_eq!(morton_encode(Vec3::zeros(), &unit_box()), 0);
    }

    #[test]
    fn box_max_sets_all_payload_bits() {
        assert_eq!(morton_encode(Vec3::repeat(1.0), &unit_box()), (1 << 30) - 1);
    }

    /// Bit-interleave oracle: interleave quantized coordinates one bit at a time.
    fn interleave_oracle(q: [u32; 3]) -> u32 {
        let mut code = 0u32;
        for bit in 0..10 {
            for (axis, &v) in q.iter().enumerate() {
                let b = (v >> bit) & 1;
                code |= b << (3 * bit + (2 - axis));
            }
        }
        code
    }

    #[test]
    fn ordering_matches_bit_interleave_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let bx = unit_box();
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for _ in 0..1000 {
            let p = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let q = [
                ((p.x * 1024.0) as u32).min(1023),
                ((p.y * 1024.0) as u32).min(1023),
                ((p.z * 1024.0) as u32).min(1023),
            ];
            pairs.push((morton_encode(p, &bx), interleave_oracle(q)));
        }
        for (ours, oracle) in &pairs {
            assert_eq!(ours, oracle);
        }
        let mut by_ours = pairs.clone();
        by_ours.sort_by_key(|p| p.0);
        let mut by_oracle = pairs;
        by_oracle.sort_by_key(|p| p.1);
        assert_eq!(by_ours, by_oracle);
    }
}
