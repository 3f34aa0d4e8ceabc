//! Block-sparse symmetric matrix storage and matrix-vector products.

use nalgebra::{DMatrix, Matrix3};
use std::collections::BTreeMap;
use std::io::Write;

use crate::vecmath::Vec3;

/// Symmetric block matrix: block diagonal, lower-triangular blocks on the
/// fixed rest-mesh adjacency pattern, and a spill map for couplings outside
/// that pattern (contact between topologically distant nodes).
#[derive(Debug, Clone)]
pub struct BlockSparseSystem {
    n: usize,
    diag: Vec<Matrix3<f64>>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    lower: Vec<Matrix3<f64>>,
    /// Keyed by (row, col) with row > col; kept ordered so products are
    /// evaluated in a reproducible order.
    extra: BTreeMap<(usize, usize), Matrix3<f64>>,
    fixed: Vec<bool>,
}

impl BlockSparseSystem {
    /// Allocate the sparsity pattern from per-node adjacency lists (the lists
    /// need not be sorted; only pairs j < i are stored).
    pub fn new(adjacency: &[Vec<usize>]) -> BlockSparseSystem {
        let n = adjacency.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for (i, nbrs) in adjacency.iter().enumerate() {
            let mut cols: Vec<usize> = nbrs.iter().copied().filter(|&j| j < i).collect();
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(&cols);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        BlockSparseSystem {
            n,
            diag: vec![Matrix3::zeros(); n],
            row_ptr,
            col_idx,
            lower: vec![Matrix3::zeros(); nnz],
            extra: BTreeMap::new(),
            fixed: vec![false; n],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Zero all numeric content, keeping the adjacency pattern.
    pub fn clear(&mut self) {
        for b in &mut self.diag {
            *b = Matrix3::zeros();
        }
        for b in &mut self.lower {
            *b = Matrix3::zeros();
        }
        self.extra.clear();
        for f in &mut self.fixed {
            *f = false;
        }
    }

    fn lower_slot(&self, row: usize, col: usize) -> Option<usize> {
        debug_assert!(row > col);
        let cols = &self.col_idx[self.row_ptr[row]..self.row_ptr[row + 1]];
        cols.binary_search(&col).ok().map(|k| self.row_ptr[row] + k)
    }

    pub fn add_diag(&mut self, i: usize, m: Matrix3<f64>) {
        self.diag[i] += m;
    }

    /// Accumulate the block A[i][j] (i != j). The symmetric mirror is implied;
    /// callers must add each unordered pair once, as A[hi][lo].
    pub fn add_offdiag(&mut self, i: usize, j: usize, m: Matrix3<f64>) {
        debug_assert_ne!(i, j);
        let (row, col, block) = if i > j { (i, j, m) } else { (j, i, m.transpose()) };
        match self.lower_slot(row, col) {
            Some(s) => self.lower[s] += block,
            None => {
                *self.extra.entry((row, col)).or_insert_with(Matrix3::zeros) += block;
            }
        }
    }

    /// Scatter a dense stencil matrix (3k x 3k over `nodes`) into the blocks.
    /// Each unordered node pair is visited once from its upper-triangle slot.
    pub fn add_stencil(&mut self, nodes: &[usize], dense: &DMatrix<f64>) {
        let k = nodes.len();
        debug_assert_eq!(dense.nrows(), 3 * k);
        debug_assert_eq!(dense.ncols(), 3 * k);
        for a in 0..k {
            for b in 0..k {
                if nodes[a] == nodes[b] && a != b {
                    continue;
                }
                let blk: Matrix3<f64> = dense.fixed_view::<3, 3>(3 * a, 3 * b).into();
                if a == b {
                    self.add_diag(nodes[a], blk);
                } else if a < b {
                    self.add_offdiag(nodes[a], nodes[b], blk);
                }
            }
        }
    }

    /// Pin the given nodes: their rows and columns are zeroed and the diagonal
    /// block replaced by the identity, so pinned increments solve to zero
    /// whenever the right-hand side is zeroed there too.
    pub fn apply_dirichlet(&mut self, fixed: &[bool]) {
        debug_assert_eq!(fixed.len(), self.n);
        self.fixed.copy_from_slice(fixed);
        for i in 0..self.n {
            if fixed[i] {
                self.diag[i] = Matrix3::identity();
            }
        }
        for row in 0..self.n {
            for s in self.row_ptr[row]..self.row_ptr[row + 1] {
                if fixed[row] || fixed[self.col_idx[s]] {
                    self.lower[s] = Matrix3::zeros();
                }
            }
        }
        self.extra.retain(|&(r, c), _| !fixed[r] && !fixed[c]);
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.fixed[i]
    }

    pub fn diag_block(&self, i: usize) -> &Matrix3<f64> {
        &self.diag[i]
    }

    /// The block A[i][j], reading through the symmetric storage.
    pub fn block(&self, i: usize, j: usize) -> Matrix3<f64> {
        if i == j {
            return self.diag[i];
        }
        let (row, col, transpose) = if i > j { (i, j, false) } else { (j, i, true) };
        let b = match self.lower_slot(row, col) {
            Some(s) => self.lower[s],
            None => self.extra.get(&(row, col)).copied().unwrap_or_else(Matrix3::zeros),
        };
        if transpose {
            b.transpose()
        } else {
            b
        }
    }

    /// y = A v.
    pub fn spmv(&self, v: &[Vec3], y: &mut [Vec3]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            y[i] = self.diag[i] * v[i];
        }
        for row in 0..self.n {
            for s in self.row_ptr[row]..self.row_ptr[row + 1] {
                let col = self.col_idx[s];
                y[row] += self.lower[s] * v[col];
                y[col] += self.lower[s].transpose() * v[row];
            }
        }
        for (&(row, col), b) in &self.extra {
            y[row] += b * v[col];
            y[col] += b.transpose() * v[row];
        }
    }

    /// Dense copy, for small test systems and the matrix dump.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(3 * self.n, 3 * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let b = self.block(i, j);
                for r in 0..3 {
                    for c in 0..3 {
                        m[(3 * i + r, 3 * j + c)] = b[(r, c)];
                    }
                }
            }
        }
        m
    }

    /// Write nonzero blocks as `i j v00 v01 v02 v10 ... v22` lines, diagonal
    /// first, then lower blocks, then spill blocks, each in index order.
    pub fn dump_blocks(&self, w: &mut impl Write) -> std::io::Result<()> {
        let fmt = |w: &mut dyn Write, i: usize, j: usize, b: &Matrix3<f64>| -> std::io::Result<()> {
            write!(w, "{} {}", i, j)?;
            for r in 0..3 {
                for c in 0..3 {
                    write!(w, " {:.17e}", b[(r, c)])?;
                }
            }
            writeln!(w)
        };
        for i in 0..self.n {
            fmt(w, i, i, &self.diag[i])?;
        }
        for row in 0..self.n {
            for s in self.row_ptr[row]..self.row_ptr[row + 1] {
                fmt(w, row, self.col_idx[s], &self.lower[s])?;
            }
        }
        for (&(row, col), b) in &self.extra {
            fmt(w, row, col, b)?;
        }
        Ok(())
    }
}
