//! Snapshot sets and POD basis construction.

use nalgebra::{DMatrix, DVector};

use super::MorError;

/// Provenance of one snapshot column.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMeta {
    pub design: String,
    /// Hypercube vertex index within the animation.
    pub vertex: u32,
    /// Simulation step the snapshot was taken at.
    pub step: u32,
}

/// Displacement snapshots of one part in its canonical frame.
#[derive(Debug, Clone, Default)]
pub struct SnapshotSet {
    /// Part DOF count (3 x part nodes).
    pub dof: usize,
    /// Snapshot columns `q - q0`.
    pub columns: Vec<DVector<f64>>,
    pub provenance: Vec<SnapshotMeta>,
    /// Designs that failed to simulate and were skipped.
    pub skipped_designs: Vec<String>,
}

impl SnapshotSet {
    pub fn new(dof: usize) -> Self {
        SnapshotSet { dof, ..Default::default() }
    }

    pub fn push(&mut self, column: DVector<f64>, meta: SnapshotMeta) {
        debug_assert_eq!(column.len(), self.dof);
        self.columns.push(column);
        self.provenance.push(meta);
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Keeps at most `max` columns by uniform stride, preserving order.
    pub fn thin(&mut self, max: usize) {
        if self.columns.len() <= max || max == 0 {
            return;
        }
        let n = self.columns.len();
        let keep: Vec<usize> = (0..max).map(|i| i * n / max).collect();
        self.columns = keep.iter().map(|&i| self.columns[i].clone()).collect();
        self.provenance = keep.iter().map(|&i| self.provenance[i].clone()).collect();
    }
}

/// An orthonormal motion basis for one part.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    /// `dof x m`, orthonormal columns.
    pub phi: DMatrix<f64>,
    pub mode_tol: f64,
    /// Fraction of snapshot energy captured by the retained modes.
    pub energy_fraction: f64,
    /// All singular values of the snapshot matrix.
    pub singular_values: Vec<f64>,
}

impl ReducedBasis {
    pub fn modes(&self) -> usize {
        self.phi.ncols()
    }

    /// Maximum deviation of `phi^T phi` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.phi.transpose() * &self.phi;
        let m = gram.nrows();
        let mut defect: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((gram[(i, j)] - target).abs());
            }
        }
        defect
    }
}

/// Identity basis of the full part; reduces nothing, used for exactness tests.
pub fn identity_basis(dof: usize) -> ReducedBasis {
    ReducedBasis {
        phi: DMatrix::identity(dof, dof),
        mode_tol: 0.0,
        energy_fraction: 1.0,
        singular_values: Vec::new(),
    }
}

/// Builds a POD basis from snapshots: an SVD of the snapshot matrix keeps the
/// smallest mode count whose trailing singular-value energy fraction
/// `sqrt(sum_{i>m} s_i^2 / sum s_i^2)` is at or below `mode_tol`, then the
/// three unit translation fields are appended (re-orthonormalized) if not
/// already spanned.
pub fn pod_basis(snapshots: &SnapshotSet, mode_tol: f64) -> Result<ReducedBasis, MorError> {
    if !(0.0 < mode_tol && mode_tol < 1.0) {
        return Err(MorError::BadTolerance(mode_tol));
    }
    if snapshots.is_empty() {
        return Err(MorError::NoSnapshots);
    }
    let dof = snapshots.dof;
    let n = snapshots.len();

    // Thin SVD via the Gram matrix of the (smaller) snapshot dimension.
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let d = snapshots.columns[i].dot(&snapshots.columns[j]);
            gram[(i, j)] = d;
            gram[(j, i)] = d;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let total_energy: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let singular_values: Vec<f64> =
        order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();

    let mut modes: Vec<DVector<f64>> = Vec::new();
    let mut energy_fraction = 1.0;
    if total_energy > 0.0 {
        // Retain the smallest m with trailing energy at or below tolerance.
        let mut m = n;
        let mut trailing = 0.0;
        for k in (0..n).rev() {
            let next = trailing + singular_values[k] * singular_values[k];
            if (next / total_energy).sqrt() <= mode_tol {
                trailing = next;
                m = k;
            } else {
                break;
            }
        }
        let m = m.max(1);
        energy_fraction = 1.0 - trailing / total_energy;
        for &oi in order.iter().take(m) {
            let sigma = singular_values[modes.len()];
            // The Gram route squares the conditioning; singular values below
            // sqrt(machine eps) of the largest are noise, not modes.
            if sigma <= 1e-7 * singular_values[0].max(1e-300) {
                break;
            }
            // u = S v / sigma
            let mut u = DVector::zeros(dof);
            for (ci, col) in snapshots.columns.iter().enumerate() {
                u.axpy(eig.eigenvectors[(ci, oi)], col, 1.0);
            }
            u /= sigma;
            // Re-orthogonalize against previous modes for numerical safety.
            for prev in &modes {
                let d = prev.dot(&u);
                u.axpy(-d, prev, 1.0);
            }
            let norm = u.norm();
            if norm > 1e-10 {
                modes.push(u / norm);
            }
        }
    }

    // Append unit translations not already spanned.
    let n_nodes = dof / 3;
    for axis in 0..3 {
        let mut t = DVector::zeros(dof);
        for node in 0..n_nodes {
            t[3 * node + axis] = 1.0 / (n_nodes as f64).sqrt();
        }
        for prev in &modes {
            let d = prev.dot(&t);
            t.axpy(-d, prev, 1.0);
        }
        let norm = t.norm();
        if norm > 1e-6 {
            modes.push(t / norm);
        }
    }

    let mut phi = DMatrix::zeros(dof, modes.len());
    for (c, m) in modes.iter().enumerate() {
        phi.set_column(c, m);
    }
    Ok(ReducedBasis { phi, mode_tol, energy_fraction, singular_values })
}
