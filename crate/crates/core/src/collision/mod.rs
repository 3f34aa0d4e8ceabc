//! Broad-phase culling with linear BVHs over triangles and edges, and
//! narrow-phase continuous collision detection with conservative
//! time-of-impact.

pub mod aabb;
pub mod ccd;
pub mod cubic;
pub mod lbvh;
pub mod morton;

pub use aabb::Aabb;
pub use ccd::{ccd_conservative_toi, CcdPairKind, CcdQuery, CcdResult};
pub use cubic::solve_cubic;
pub use lbvh::Lbvh;
pub use morton::morton_encode;

use crate::contact::PairTopo;
use crate::mesh::SimMesh;
use crate::vecmath::Vec3;

/// Broad phase: candidate VF/EE pairs whose swept, inflated boxes overlap.
///
/// Two distinct trees are built, one over surface triangles and one over
/// surface edges. VF candidates come from querying swept vertex boxes against
/// the triangle tree; EE candidates from the edge tree's self-overlap query.
/// Pairs sharing a node are excluded. Every pair whose continuous trajectory
/// comes within `d_hat` is reported (boxes are inflated by the swept
/// displacement plus the `d_hat` margin).
pub fn query_candidates(
    mesh: &SimMesh,
    x_start: &[Vec3],
    x_end: &[Vec3],
    d_hat: f64,
) -> Vec<PairTopo> {
    let margin = d_hat;
    let tri_boxes: Vec<Aabb> = mesh
        .surface_tris
        .iter()
        .map(|t| {
            let mut b = Aabb::empty();
            for &v in t {
                b.grow(x_start[v]);
                b.grow(x_end[v]);
            }
            b.inflate(margin);
            b
        })
        .collect();
    let edge_boxes: Vec<Aabb> = mesh
        .surface_edges
        .iter()
        .map(|e| {
            let mut b = Aabb::empty();
            for &v in e {
                b.grow(x_start[v]);
                b.grow(x_end[v]);
            }
            b.inflate(margin);
            b
        })
        .collect();

    let mut candidates = Vec::new();

    if !tri_boxes.is_empty() {
        let tri_tree = Lbvh::build(&tri_boxes);
        // Surface vertices: nodes referenced by any surface triangle.
        let mut surface_nodes: Vec<usize> = mesh.surface_tris.iter().flatten().copied().collect();
        surface_nodes.sort_unstable();
        surface_nodes.dedup();
        for &v in &surface_nodes {
            let mut b = Aabb::empty();
            b.grow(x_start[v]);
            b.grow(x_end[v]);
            b.inflate(margin);
            for ti in tri_tree.query(&b) {
                let tri = mesh.surface_tris[ti];
                if tri.contains(&v) {
                    continue;
                }
                candidates.push(PairTopo::VertexTriangle { v, tri });
            }
        }
    }

    if !edge_boxes.is_empty() {
        let edge_tree = Lbvh::build(&edge_boxes);
        for (ei, ej) in edge_tree.self_overlap_pairs() {
            let a = mesh.surface_edges[ei];
            let b = mesh.surface_edges[ej];
            if a.iter().any(|v| b.contains(v)) {
                continue;
            }
            candidates.push(PairTopo::EdgeEdge { a, b });
        }
    }

    candidates.sort_unstable();
    candidates.dedup();
    candidates
}
