//! ECSW hyperreduction: pick a weighted element subset whose projected
//! internal-force contributions reproduce the full assembly on the training
//! snapshots.

use nalgebra::DVector;

use super::nnls::nnls_to_target;
use super::pod::{ReducedBasis, SnapshotSet};
use super::MorError;
use crate::fem::FemModel;

/// The reduced integration domain: selected elements with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedIntegrationDomain {
    pub elements: Vec<u32>,
    pub weights: Vec<f64>,
    /// `||G xi - g||` as terminated.
    pub training_residual: f64,
    /// `hr_tol * ||g||`, the acceptance threshold used.
    pub residual_target: f64,
    pub hr_tol: f64,
}

impl ReducedIntegrationDomain {
    /// Full-integration domain: every element with weight one.
    pub fn full(n_elements: usize) -> Self {
        ReducedIntegrationDomain {
            elements: (0..n_elements as u32).collect(),
            weights: vec![1.0; n_elements],
            training_residual: 0.0,
            residual_target: 0.0,
            hr_tol: 0.0,
        }
    }
}

/// Builds the ECSW training system and solves the sparse NNLS.
///
/// Row block `k` of the training matrix holds, per element `e`, the basis
/// projection of that element's internal force at training snapshot `k`; the
/// target is the row sum (the fully assembled projection), so all-ones
/// weights are always feasible. Training snapshots are thinned to
/// `max_training_snapshots` columns.
pub fn ecsw_weights(
    snapshots: &SnapshotSet,
    basis: &ReducedBasis,
    part_model: &FemModel,
    hr_tol: f64,
    max_training_snapshots: usize,
) -> Result<ReducedIntegrationDomain, MorError> {
    if !(hr_tol > 0.0) {
        return Err(MorError::BadTolerance(hr_tol));
    }
    if snapshots.is_empty() {
        return Err(MorError::NoSnapshots);
    }
    let mut training = snapshots.clone();
    training.thin(max_training_snapshots);

    let m = basis.modes();
    let n_elem = part_model.elements.len();
    let rows = m * training.len();

    // G columns: one per element.
    let mut columns: Vec<DVector<f64>> = vec![DVector::zeros(rows); n_elem];
    let mut q = vec![0.0; part_model.dof()];
    for (k, u) in training.columns.iter().enumerate() {
        for i in 0..q.len() {
            q[i] = part_model.rest[i] + u[i];
        }
        for (ei, col) in columns.iter_mut().enumerate() {
            let (_, f) = part_model
                .element_force_only(ei, &q)
                .map_err(|e| MorError::Fem(e.to_string()))?;
            // Project the 12-dim element force onto the basis.
            let elem = &part_model.elements[ei];
            for mode in 0..m {
                let mut acc = 0.0;
                for (ni, &node) in elem.nodes.iter().enumerate() {
                    for c in 0..3 {
                        acc += basis.phi[(3 * node as usize + c, mode)] * f[3 * ni + c];
                    }
                }
                col[k * m + mode] = acc;
            }
        }
    }

    let mut g = DVector::zeros(rows);
    for col in &columns {
        g += col;
    }
    let g_norm = g.norm();
    let target = hr_tol * g_norm;
    if g_norm == 0.0 || target >= g_norm {
        // The empty set already satisfies the tolerance.
        return Ok(ReducedIntegrationDomain {
            elements: Vec::new(),
            weights: Vec::new(),
            training_residual: g_norm,
            residual_target: target,
            hr_tol,
        });
    }

    let result = nnls_to_target(&columns, &g, target, 4 * n_elem)?;
    let mut pairs: Vec<(u32, f64)> = result
        .support
        .iter()
        .map(|&e| e as u32)
        .zip(result.weights.iter().copied())
        .collect();
    pairs.sort_unstable_by_key(|(e, _)| *e);
    Ok(ReducedIntegrationDomain {
        elements: pairs.iter().map(|(e, _)| *e).collect(),
        weights: pairs.iter().map(|(_, w)| *w).collect(),
        training_residual: result.residual,
        residual_target: target,
        hr_tol,
    })
}

/// Recomputes `||G xi - g||` for a stored RID against a snapshot set; used by
/// the acceptance suite to re-verify the training guarantee from artifacts.
pub fn verify_rid_residual(
    snapshots: &SnapshotSet,
    basis: &ReducedBasis,
    part_model: &FemModel,
    rid: &ReducedIntegrationDomain,
    max_training_snapshots: usize,
) -> Result<(f64, f64), MorError> {
    let mut training = snapshots.clone();
    training.thin(max_training_snapshots);
    let m = basis.modes();
    let rows = m * training.len();
    let mut g: DVector<f64> = DVector::zeros(rows);
    let mut g_xi: DVector<f64> = DVector::zeros(rows);
    let mut q = vec![0.0; part_model.dof()];
    let weight_of: std::collections::HashMap<u32, f64> =
        rid.elements.iter().copied().zip(rid.weights.iter().copied()).collect();
    for (k, u) in training.columns.iter().enumerate() {
        for i in 0..q.len() {
            q[i] = part_model.rest[i] + u[i];
        }
        for ei in 0..part_model.elements.len() {
            let (_, f) = part_model
                .element_force_only(ei, &q)
                .map_err(|e| MorError::Fem(e.to_string()))?;
            let elem = &part_model.elements[ei];
            let w = weight_of.get(&(ei as u32)).copied().unwrap_or(0.0);
            for mode in 0..m {
                let mut acc = 0.0;
                for (ni, &node) in elem.nodes.iter().enumerate() {
                    for c in 0..3 {
                        acc += basis.phi[(3 * node as usize + c, mode)] * f[3 * ni + c];
                    }
                }
                g[k * m + mode] += acc;
                g_xi[k * m + mode] += w * acc;
            }
        }
    }
    Ok(((g_xi - &g).norm(), g.norm()))
}
