//! Linear BVH: Morton-sorted primitives under a binary radix tree.
//!
//! Keys are 64-bit: the high 32 bits hold the Morton code, the low 32 bits
//! the primitive index, so keys are unique even when codes collide. Internal
//! node split positions follow the longest-common-prefix rule on the sorted
//! keys; node boxes are computed bottom-up with each internal node finalized
//! only after both children have been visited.

use super::aabb::Aabb;
use super::morton::morton_encode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRef {
    Internal(usize),
    Leaf(usize),
}

#[derive(Debug, Clone)]
pub struct Lbvh {
    /// Sorted keys, strictly increasing.
    pub keys: Vec<u64>,
    /// Primitive index per sorted leaf.
    pub leaf_prim: Vec<usize>,
    left: Vec<NodeRef>,
    right: Vec<NodeRef>,
    internal_box: Vec<Aabb>,
    leaf_box: Vec<Aabb>,
}

impl Lbvh {
    pub fn build(prims: &[Aabb]) -> Lbvh {
        assert!(!prims.is_empty(), "LBVH needs at least one primitive");
        let p = prims.len();
        let mut scene = Aabb::empty();
        for b in prims {
            scene = scene.union(b);
        }
        let mut keys: Vec<u64> = (0..p)
            .map(|i| ((morton_encode(prims[i].center(), &scene) as u64) << 32) | i as u64)
            .collect();
        // Stable order is irrelevant since keys are unique; sorted order is
        // the contract, not the sort algorithm.
        keys.sort_unstable();
        let leaf_prim: Vec<usize> = keys.iter().map(|&k| (k & 0xffff_ffff) as usize).collect();
        let leaf_box: Vec<Aabb> = leaf_prim.iter().map(|&i| prims[i]).collect();

        if p == 1 {
            return Lbvh {
                keys,
                leaf_prim,
                left: Vec::new(),
                right: Vec::new(),
                internal_box: Vec::new(),
                leaf_box,
            };
        }

        let delta = |i: isize, j: isize| -> i64 {
            if j < 0 || j >= p as isize {
                return -1;
            }
            (keys[i as usize] ^ keys[j as usize]).leading_zeros() as i64
        };

        let n_internal = p - 1;
        let mut left = vec![NodeRef::Leaf(0); n_internal];
        let mut right = vec![NodeRef::Leaf(0); n_internal];
        // Parent links for the bottom-up reduction: leaves and internals.
        let mut parent_of_leaf = vec![usize::MAX; p];
        let mut parent_of_internal = vec![usize::MAX; n_internal];

        for i in 0..n_internal {
            let ii = i as isize;
            let d: isize = if delta(ii, ii + 1) > delta(ii, ii - 1) { 1 } else { -1 };
            let delta_min = delta(ii, ii - d);
            let mut lmax: isize = 2;
            while delta(ii, ii + lmax * d) > delta_min {
                lmax *= 2;
            }
            let mut l: isize = 0;
            let mut t = lmax / 2;
            while t >= 1 {
                if delta(ii, ii + (l + t) * d) > delta_min {
                    l += t;
                }
                t /= 2;
            }
            let j = ii + l * d;
            let delta_node = delta(ii, j);
            let mut s: isize = 0;
            let mut t = (l + 1) / 2;
            loop {
                if delta(ii, ii + (s + t) * d) > delta_node {
                    s += t;
                }
                if t == 1 {
                    break;
                }
                t = (t + 1) / 2;
            }
            let gamma = (ii + s * d + d.min(0)) as usize;
            let (lo, hi) = (ii.min(j) as usize, ii.max(j) as usize);
            let lchild = if lo == gamma { NodeRef::Leaf(gamma) } else { NodeRef::Internal(gamma) };
            let rchild = if hi == gamma + 1 {
                NodeRef::Leaf(gamma + 1)
            } else {
                NodeRef::Internal(gamma + 1)
            };
            left[i] = lchild;
            right[i] = rchild;
            match lchild {
                NodeRef::Leaf(k) => parent_of_leaf[k] = i,
                NodeRef::Internal(k) => parent_of_internal[k] = i,
            }
            match rchild {
                NodeRef::Leaf(k) => parent_of_leaf[k] = i,
                NodeRef::Internal(k) => parent_of_internal[k] = i,
            }
        }

        // Bottom-up box reduction with the two-visit gate: the first child to
        // arrive at a node stops; the second finalizes the box and climbs.
        let mut internal_box = vec![Aabb::empty(); n_internal];
        let mut visits = vec![0u8; n_internal];
        for leaf in 0..p {
            let mut node = parent_of_leaf[leaf];
            loop {
                visits[node] += 1;
                if visits[node] < 2 {
                    break;
                }
                let lb = match left[node] {
                    NodeRef::Leaf(k) => leaf_box[k],
                    NodeRef::Internal(k) => internal_box[k],
                };
                let rb = match right[node] {
                    NodeRef::Leaf(k) => leaf_box[k],
                    NodeRef::Internal(k) => internal_box[k],
                };
                internal_box[node] = lb.union(&rb);
                if parent_of_internal[node] == usize::MAX {
                    break;
                }
                node = parent_of_internal[node];
            }
        }

        Lbvh {
            keys,
            leaf_prim,
            left,
            right,
            internal_box,
            leaf_box,
        }
    }

    fn root(&self) -> NodeRef {
        if self.leaf_prim.len() == 1 {
            NodeRef::Leaf(0)
        } else {
            NodeRef::Internal(0)
        }
    }

    fn node_box(&self, n: NodeRef) -> &Aabb {
        match n {
            NodeRef::Leaf(k) => &self.leaf_box[k],
            NodeRef::Internal(k) => &self.internal_box[k],
        }
    }

    /// Primitive indices whose boxes overlap `query`, sorted ascending.
    pub fn query(&self, query: &Aabb) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root()];
        while let Some(node) = stack.pop() {
            if !self.node_box(node).overlaps(query) {
                continue;
            }
            match node {
                NodeRef::Leaf(k) => out.push(self.leaf_prim[k]),
                NodeRef::Internal(k) => {
                    stack.push(self.left[k]);
                    stack.push(self.right[k]);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// All unordered primitive pairs (i < j) with overlapping boxes.
    pub fn self_overlap_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut stack = vec![(self.root(), self.root())];
        while let Some((a, b)) = stack.pop() {
            if !self.node_box(a).overlaps(self.node_box(b)) {
                continue;
            }
            match (a, b) {
                (NodeRef::Leaf(la), NodeRef::Leaf(lb)) => {
                    if a != b {
                        let (pi, pj) = (self.leaf_prim[la], self.leaf_prim[lb]);
                        out.push((pi.min(pj), pi.max(pj)));
                    }
                }
                (NodeRef::Internal(k), _) if a == b => {
                    stack.push((self.left[k], self.left[k]));
                    stack.push((self.right[k], self.right[k]));
                    stack.push((self.left[k], self.right[k]));
                }
                (NodeRef::Internal(k), _) => {
                    stack.push((self.left[k], b));
                    stack.push((self.right[k], b));
                }
                (NodeRef::Leaf(_), NodeRef::Internal(k)) => {
                    stack.push((a, self.left[k]));
                    stack.push((a, self.right[k]));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn internal_count(&self) -> usize {
        self.left.len()
    }

    /// Structural invariant check used by tests: every internal node's box
    /// contains both children's boxes.
    pub fn boxes_consistent(&self) -> bool {
        (0..self.left.len()).all(|i| {
            self.internal_box[i].contains_box(self.node_box(self.left[i]))
                && self.internal_box[i].contains_box(self.node_box(self.right[i]))
        })
    }
}
