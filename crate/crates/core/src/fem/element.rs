//! Linear tetrahedral element: stiffness matrix, deformation gradient, and
//! the polar-decomposition rotation used for corotational assembly.

use nalgebra::{Matrix3, Point3, SMatrix, SVector};

pub type ElemMat = SMatrix<f64, 12, 12>;
pub type ElemVec = SVector<f64, 12>;

/// Precomputed rest-state data of one tet.
#[derive(Debug, Clone)]
pub struct TetElement {
    pub nodes: [u32; 4],
    pub volume: f64,
    /// Inverse rest edge matrix, for the deformation gradient.
    pub dm_inv: Matrix3<f64>,
    /// Rest-frame stiffness, `V * B^T D B`.
    pub stiffness: ElemMat,
}

impl TetElement {
    /// Builds the element from rest positions and Lamé parameters. The tet
    /// must be positively oriented.
    pub fn new(nodes: [u32; 4], rest: [Point3<f64>; 4], lambda: f64, mu: f64) -> TetElement {
        let dm = edge_matrix(&rest);
        let volume = dm.determinant() / 6.0;
        debug_assert!(volume > 0.0, "tet must have positive volume");
        let dm_inv = dm.try_inverse().expect("degenerate tet");
        let stiffness = stiffness_matrix(&dm_inv, volume, lambda, mu);
        TetElement { nodes, volume, dm_inv, stiffness }
    }

    /// Deformation gradient at the given current positions.
    pub fn deformation_gradient(&self, current: &[Point3<f64>; 4]) -> Matrix3<f64> {
        edge_matrix(current) * self.dm_inv
    }
}

fn edge_matrix(p: &[Point3<f64>; 4]) -> Matrix3<f64> {
    Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]])
}

/// `V * B^T D B` for isotropic linear elasticity with engineering strain.
fn stiffness_matrix(dm_inv: &Matrix3<f64>, volume: f64, lambda: f64, mu: f64) -> ElemMat {
    // Shape-function gradients: rows of dm_inv for nodes 1..3, and the
    // negated sum for node 0.
    let mut grads = [[0.0f64; 3]; 4];
    for a in 0..3 {
        for c in 0..3 {
            grads[a + 1][c] = dm_inv[(a, c)];
        }
    }
    for c in 0..3 {
        grads[0][c] = -(grads[1][c] + grads[2][c] + grads[3][c]);
    }

    let mut b = SMatrix::<f64, 6, 12>::zeros();
    for a in 0..4 {
        let [gx, gy, gz] = grads[a];
        let col = 3 * a;
        b[(0, col)] = gx;
        b[(1, col + 1)] = gy;
        b[(2, col + 2)] = gz;
        b[(3, col)] = gy;
        b[(3, col + 1)] = gx;
        b[(4, col + 1)] = gz;
        b[(4, col + 2)] = gy;
        b[(5, col)] = gz;
        b[(5, col + 2)] = gx;
    }

    let mut d = SMatrix::<f64, 6, 6>::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lambda;
        }
        d[(i, i)] = lambda + 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }

    b.transpose() * d * b * volume
}

/// Rotation factor of the polar decomposition `F = R S` via Higham iteration,
/// with an SVD fallback near singular configurations. Returns `None` when the
/// element is inverted (`det F <= 0`).
pub fn polar_rotation(f: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let det = f.determinant();
    if det <= 0.0 || !det.is_finite() {
        return None;
    }
    let mut r = *f;
    for _ in 0..40 {
        let r_inv_t = match r.try_inverse() {
            Some(inv) => inv.transpose(),
            None => return polar_rotation_svd(f),
        };
        let next = (r + r_inv_t) * 0.5;
        let delta = (next - r).norm();
        r = next;
        if delta < 1e-13 {
            return Some(r);
        }
    }
    polar_rotation_svd(f)
}

fn polar_rotation_svd(f: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    let svd = f.svd(true, true);
    let (u, mut v_t) = (svd.u?, svd.v_t?);
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        // Flip the weakest singular direction to stay in SO(3).
        for c in 0..3 {
            v_t[(2, c)] = -v_t[(2, c)];
        }
        r = u * v_t;
    }
    Some(r)
}
