//! CSR sparse matrix with a symmetric-Gauss-Seidel preconditioned conjugate
//! gradient solver. The sparsity pattern is built once from the mesh
//! connectivity; per-step assembly only rewrites values.

use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("conjugate gradient did not converge in {iters} iterations (relative residual {rel_residual:.3e})")]
pub struct SolveError {
    pub iters: usize,
    pub rel_residual: f64,
}

/// Symmetric positive-definite matrix in CSR form.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<u32>,
    pub col_idx: Vec<u32>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds a pattern from undirected node-pair adjacency (3x3 DOF blocks
    /// per pair, diagonal blocks included for `0..n_nodes`).
    pub fn from_node_pairs(n_nodes: usize, pairs: impl Iterator<Item = (u32, u32)>) -> Csr {
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n_nodes];
        for i in 0..n_nodes as u32 {
            adj[i as usize].push(i);
        }
        for (a, b) in pairs {
            if a != b {
                adj[a as usize].push(b);
                adj[b as usize].push(a);
            }
        }
        for row in adj.iter_mut() {
            row.sort_unstable();
            row.dedup();
        }
        let n = 3 * n_nodes;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0u32);
        for node in 0..n_nodes {
            for _ in 0..3 {
                for &nb in &adj[node] {
                    for c in 0..3 {
                        col_idx.push(3 * nb + c);
                    }
                }
                row_ptr.push(col_idx.len() as u32);
            }
        }
        let values = vec![0.0; col_idx.len()];
        Csr { n, row_ptr, col_idx, values }
    }

    pub fn zero_values(&mut self) {
        self.values.fill(0.0);
    }

    /// Index of entry (row, col) in `values`; the pair must be in the pattern.
    pub fn entry_index(&self, row: usize, col: usize) -> usize {
        let start = self.row_ptr[row] as usize;
        let end = self.row_ptr[row + 1] as usize;
        let cols = &self.col_idx[start..end];
        start + cols.binary_search(&(col as u32)).expect("entry not in sparsity pattern")
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let idx = self.entry_index(row, col);
        self.values[idx] += v;
    }

    pub fn mul_vec(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        // The pattern groups columns as 3-wide node blocks and rows in node
        // triples with identical structure; process three rows per pass so
        // each x block is loaded once.
        let xs = x.as_slice();
        let out = out.as_mut_slice();
        let n_nodes = self.n / 3;
        for node in 0..n_nodes {
            let r0 = 3 * node;
            let start = self.row_ptr[r0] as usize;
            let end = self.row_ptr[r0 + 1] as usize;
            let len = end - start;
            let s1 = self.row_ptr[r0 + 1] as usize;
            let s2 = self.row_ptr[r0 + 2] as usize;
            let (mut a0, mut a1, mut a2) = (0.0, 0.0, 0.0);
            let cols = &self.col_idx[start..end];
            let v0 = &self.values[start..end];
            let v1 = &self.values[s1..s1 + len];
            let v2 = &self.values[s2..s2 + len];
            for (k, &c) in cols.iter().enumerate() {
                let xv = xs[c as usize];
                a0 += v0[k] * xv;
                a1 += v1[k] * xv;
                a2 += v2[k] * xv;
            }
            out[r0] = a0;
            out[r0 + 1] = a1;
            out[r0 + 2] = a2;
        }
    }

    pub fn diag(&self, row: usize) -> f64 {
        self.values[self.entry_index(row, row)]
    }

    /// Zeroes row and column `dof` and sets the diagonal to `diag`, keeping
    /// the matrix symmetric. Used for Dirichlet conditions.
    pub fn apply_dirichlet(&mut self, dof: usize, diag: f64) {
        for k in self.row_ptr[dof] as usize..self.row_ptr[dof + 1] as usize {
            let col = self.col_idx[k] as usize;
            self.values[k] = if col == dof { diag } else { 0.0 };
            if col != dof {
                let idx = self.entry_index(col, dof);
                self.values[idx] = 0.0;
            }
        }
    }

    /// Relative symmetry defect `max |a_ij - a_ji| / max |a_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut max_abs: f64 = 0.0;
        let mut max_diff: f64 = 0.0;
        for row in 0..self.n {
            for k in self.row_ptr[row] as usize..self.row_ptr[row + 1] as usize {
                let col = self.col_idx[k] as usize;
                let v = self.values[k];
                max_abs = max_abs.max(v.abs());
                if col > row {
                    let vt = self.values[self.entry_index(col, row)];
                    max_diff = max_diff.max((v - vt).abs());
                }
            }
        }
        if max_abs == 0.0 {
            0.0
        } else {
            max_diff / max_abs
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for row in 0..self.n {
            for k in self.row_ptr[row] as usize..self.row_ptr[row + 1] as usize {
                m[(row, self.col_idx[k] as usize)] = self.values[k];
            }
        }
        m
    }
}

/// Zero-fill incomplete Cholesky factor, used as a CG preconditioner. The
/// factorization reuses A's lower-triangle pattern; a diagonal shift is
/// applied on breakdown.
#[derive(Debug, Clone)]
pub struct Ic0 {
    /// Lower-triangular factor on the lower pattern of A (diagonal included).
    l: Csr,
}

impl Ic0 {
    /// Factors the lower triangle of `a`, retrying with growing diagonal
    /// shifts if a pivot fails. Returns `None` only if even a strong shift
    /// breaks down.
    pub fn factor(a: &Csr) -> Option<Ic0> {
        for shift in [0.0, 1e-3, 1e-2, 1e-1, 1.0] {
            if let Some(ic) = Self::try_factor(a, shift) {
                return Some(ic);
            }
        }
        None
    }

    fn try_factor(a: &Csr, shift: f64) -> Option<Ic0> {
        let n = a.n;
        // Lower-triangle pattern of A.
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0u32);
        for row in 0..n {
            for k in a.row_ptr[row] as usize..a.row_ptr[row + 1] as usize {
                let col = a.col_idx[k] as usize;
                if col <= row {
                    col_idx.push(col as u32);
                }
            }
            row_ptr.push(col_idx.len() as u32);
        }
        let mut l = Csr { n, row_ptr, col_idx, values: Vec::new() };
        l.values = vec![0.0; l.col_idx.len()];

        for row in 0..n {
            let row_start = l.row_ptr[row] as usize;
            let row_end = l.row_ptr[row + 1] as usize;
            // Entries of A for this row's lower part, in the same order.
            let mut a_vals = Vec::with_capacity(row_end - row_start);
            for k in a.row_ptr[row] as usize..a.row_ptr[row + 1] as usize {
                let col = a.col_idx[k] as usize;
                if col <= row {
                    let mut v = a.values[k];
                    if col == row {
                        v += shift * v.abs();
                    }
                    a_vals.push(v);
                }
            }
            for (off, k) in (row_start..row_end).enumerate() {
                let col = l.col_idx[k] as usize;
                // Sparse dot of rows `row` and `col` over columns < col.
                let mut sum = 0.0;
                let mut pi = row_start;
                let mut pj = l.row_ptr[col] as usize;
                let pi_end = k;
                let pj_end = l.row_ptr[col + 1] as usize - 1; // exclude diag of col
                while pi < pi_end && pj < pj_end {
                    let ci = l.col_idx[pi];
                    let cj = l.col_idx[pj];
                    match ci.cmp(&cj) {
                        std::cmp::Ordering::Less => pi += 1,
                        std::cmp::Ordering::Greater => pj += 1,
                        std::cmp::Ordering::Equal => {
                            sum += l.values[pi] * l.values[pj];
                            pi += 1;
                            pj += 1;
                        }
                    }
                }
                let v = a_vals[off] - sum;
                if col == row {
                    if v <= 0.0 {
                        return None;
                    }
                    l.values[k] = v.sqrt();
                } else {
                    let d = l.values[l.row_ptr[col + 1] as usize - 1];
                    l.values[k] = v / d;
                }
            }
        }
        Some(Ic0 { l })
    }

    /// Solves `L L^T z = r`.
    pub fn apply(&self, r: &DVector<f64>, z: &mut DVector<f64>) {
        let l = &self.l;
        let n = l.n;
        // Forward: L y = r.
        for row in 0..n {
            let start = l.row_ptr[row] as usize;
            let end = l.row_ptr[row + 1] as usize;
            let mut acc = r[row];
            for k in start..end - 1 {
                acc -= l.values[k] * z[l.col_idx[k] as usize];
            }
            z[row] = acc / l.values[end - 1];
        }
        // Backward: L^T z = y, traversing rows in reverse and scattering.
        for row in (0..n).rev() {
            let start = l.row_ptr[row] as usize;
            let end = l.row_ptr[row + 1] as usize;
            let zi = z[row] / l.values[end - 1];
            z[row] = zi;
            for k in start..end - 1 {
                z[l.col_idx[k] as usize] -= l.values[k] * zi;
            }
        }
    }
}

/// Preconditioner choice for [`pcg`].
pub enum Precond<'a> {
    Sgs,
    Ic(&'a Ic0),
}

/// Scratch space for [`pcg`], reusable across solves.
#[derive(Debug, Clone, Default)]
pub struct CgScratch {
    r: DVector<f64>,
    z: DVector<f64>,
    p: DVector<f64>,
    ap: DVector<f64>,
}

impl CgScratch {
    pub fn new(n: usize) -> Self {
        CgScratch {
            r: DVector::zeros(n),
            z: DVector::zeros(n),
            p: DVector::zeros(n),
            ap: DVector::zeros(n),
        }
    }

    fn resize(&mut self, n: usize) {
        if self.r.len() != n {
            *self = CgScratch::new(n);
        }
    }
}

/// Symmetric Gauss-Seidel preconditioner application: solves
/// (D+L) D^-1 (D+U) z = r with forward and backward sweeps.
fn sgs_apply(a: &Csr, r: &DVector<f64>, z: &mut DVector<f64>) {
    let n = a.n;
    // Forward: (D+L) y = r, stored into z.
    for row in 0..n {
        let mut acc = r[row];
        let mut diag = 1.0;
        for k in a.row_ptr[row] as usize..a.row_ptr[row + 1] as usize {
            let col = a.col_idx[k] as usize;
            if col < row {
                acc -= a.values[k] * z[col];
            } else if col == row {
                diag = a.values[k];
            }
        }
        z[row] = acc / diag;
    }
    // Scale by D, then backward: (D+U) z = D y.
    for row in (0..n).rev() {
        let mut acc = z[row] * a.diag(row);
        let mut diag = 1.0;
        for k in a.row_ptr[row] as usize..a.row_ptr[row + 1] as usize {
            let col = a.col_idx[k] as usize;
            if col > row {
                acc -= a.values[k] * z[col];
            } else if col == row {
                diag = a.values[k];
            }
        }
        z[row] = acc / diag;
    }
}

/// Preconditioned conjugate gradient, warm-started from `x`.
/// Converges when `||r|| <= rel_tol * ||b||` (or `||b|| = 0`).
pub fn pcg(
    a: &Csr,
    b: &DVector<f64>,
    x: &mut DVector<f64>,
    rel_tol: f64,
    max_iters: usize,
    scratch: &mut CgScratch,
) -> Result<usize, SolveError> {
    pcg_with(a, b, x, rel_tol, max_iters, scratch, &Precond::Sgs)
}

/// [`pcg`] with an explicit preconditioner.
#[allow(clippy::too_many_arguments)]
pub fn pcg_with(
    a: &Csr,
    b: &DVector<f64>,
    x: &mut DVector<f64>,
    rel_tol: f64,
    max_iters: usize,
    scratch: &mut CgScratch,
    precond: &Precond,
) -> Result<usize, SolveError> {
    let n = a.n;
    scratch.resize(n);
    let b_norm = b.norm();
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(0);
    }
    let tol = rel_tol * b_norm;

    a.mul_vec(x, &mut scratch.ap);
    scratch.r.copy_from(b);
    scratch.r -= &scratch.ap;
    if scratch.r.norm() <= tol {
        return Ok(0);
    }
    let apply = |r: &DVector<f64>, z: &mut DVector<f64>| match precond {
        Precond::Sgs => sgs_apply(a, r, z),
        Precond::Ic(ic) => ic.apply(r, z),
    };
    apply(&scratch.r, &mut scratch.z);
    scratch.p.copy_from(&scratch.z);
    let mut rz = scratch.r.dot(&scratch.z);

    for iter in 1..=max_iters {
        a.mul_vec(&scratch.p, &mut scratch.ap);
        let p_ap = scratch.p.dot(&scratch.ap);
        let alpha = rz / p_ap;
        x.axpy(alpha, &scratch.p, 1.0);
        scratch.r.axpy(-alpha, &scratch.ap, 1.0);
        let r_norm = scratch.r.norm();
        if r_norm <= tol {
            return Ok(iter);
        }
        apply(&scratch.r, &mut scratch.z);
        let rz_next = scratch.r.dot(&scratch.z);
        let beta = rz_next / rz;
        rz = rz_next;
        // p = z + beta p
        scratch.p *= beta;
        scratch.p += &scratch.z;
    }
    Err(SolveError { iters: max_iters, rel_residual: scratch.r.norm() / b_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n_nodes: usize) -> Csr {
        let mut a = Csr::from_node_pairs(n_nodes, (0..n_nodes as u32 - 1).map(|i| (i, i + 1)));
        for node in 0..n_nodes {
            for c in 0..3 {
                let dof = 3 * node + c;
                a.add(dof, dof, 2.0);
                if node > 0 {
                    a.add(dof, 3 * (node - 1) + c, -1.0);
                }
                if node + 1 < n_nodes {
                    a.add(dof, 3 * (node + 1) + c, -1.0);
                }
            }
        }
        a
    }

    #[test]
    fn pcg_solves_laplacian() {
        let a = laplacian_1d(50);
        let x_true = DVector::from_fn(a.n, |i, _| (i as f64 * 0.37).sin());
        let mut b = DVector::zeros(a.n);
        a.mul_vec(&x_true, &mut b);
        let mut x = DVector::zeros(a.n);
        let mut scratch = CgScratch::new(a.n);
        let iters = pcg(&a, &b, &mut x, 1e-12, 10_000, &mut scratch).unwrap();
        assert!(iters > 0);
        assert!((x - x_true).norm() < 1e-8);
    }

    #[test]
    fn dirichlet_preserves_symmetry() {
        let mut a = laplacian_1d(10);
        a.apply_dirichlet(0, 1.0);
        a.apply_dirichlet(17, 1.0);
        assert_eq!(a.symmetry_defect(), 0.0);
    }

    #[test]
    fn ic0_on_dense_pattern_is_exact() {
        // On a fully dense pattern IC(0) equals the exact Cholesky factor, so
        // preconditioned CG must converge in a handful of iterations.
        let n_nodes = 4;
        let mut pairs = Vec::new();
        for a in 0..n_nodes as u32 {
            for b in a + 1..n_nodes as u32 {
                pairs.push((a, b));
            }
        }
        let mut a = Csr::from_node_pairs(n_nodes, pairs.into_iter());
        let n = a.n;
        // SPD: A = I*d + small symmetric perturbation.
        for i in 0..n {
            for j in 0..n {
                let v = 1.0 / (1.0 + (i as f64 - j as f64).abs());
                a.add(i, j, if i == j { 10.0 + v } else { v });
            }
        }
        let ic = Ic0::factor(&a).unwrap();
        let x_true = DVector::from_fn(n, |i, _| (i as f64 * 0.7).cos());
        let mut b = DVector::zeros(n);
        a.mul_vec(&x_true, &mut b);
        let mut x = DVector::zeros(n);
        let mut scratch = CgScratch::new(n);
        let iters =
            pcg_with(&a, &b, &mut x, 1e-12, 100, &mut scratch, &Precond::Ic(&ic)).unwrap();
        assert!(iters <= 3, "dense-pattern IC should be exact, took {iters}");
        assert!((x - x_true).norm() < 1e-8);
    }

    #[test]
    fn nonconvergence_reports_residual() {
        let a = laplacian_1d(50);
        let b = DVector::from_element(a.n, 1.0);
        let mut x = DVector::zeros(a.n);
        let mut scratch = CgScratch::new(a.n);
        let err = pcg(&a, &b, &mut x, 1e-14, 2, &mut scratch).unwrap_err();
        assert!(err.rel_residual > 0.0);
        assert_eq!(err.iters, 2);
    }
}
