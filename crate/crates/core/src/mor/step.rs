//! Reduced-order time stepping: the full-order step projected through the
//! block-diagonal basis, with hyperreduced element assembly and exact
//! contact, tie, and pressure terms on reconstructed surface nodes.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::reduced::{BlockBasis, ReducedModel};
use super::MorError;
use crate::fem::contact::{contact_points, ContactConfig};
use crate::fem::{FemModel, FullOrderState, MaterialParams, PressureCommand};

/// Reduced coordinates and their rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub alpha: DVector<f64>,
    pub alpha_dot: DVector<f64>,
    pub t: f64,
}

impl ReducedState {
    pub fn rest(dim: usize) -> Self {
        ReducedState { alpha: DVector::zeros(dim), alpha_dot: DVector::zeros(dim), t: 0.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReducedSolverConfig {
    /// Velocity spikes beyond this trigger substepping, mm/s.
    pub velocity_limit: f64,
    pub max_substep_depth: u32,
}

impl Default for ReducedSolverConfig {
    fn default() -> Self {
        ReducedSolverConfig { velocity_limit: 1000.0, max_substep_depth: 5 }
    }
}

/// Reduced-order simulator for one robot. Holds the robot-level FEM model for
/// element kernels and the precomputed reduced constants.
pub struct ReducedSim {
    pub model: FemModel,
    pub rmodel: ReducedModel,
    pub solver: ReducedSolverConfig,
    dim: usize,
    /// Reduced lumped mass.
    m_red: DMatrix<f64>,
    /// Constant reduced tie stiffness.
    k_ties: DMatrix<f64>,
    /// Reduced gravity load, `phi^T M g`.
    gravity: DVector<f64>,
    /// Per integration element: basis rows of its 4 nodes (12 x m_block).
    elem_phi: Vec<ElemProjection>,
    /// Scratch full-space vectors.
    q_full: Vec<f64>,
    v_full: Vec<f64>,
    f_full: Vec<f64>,
}

enum ElemProjection {
    /// Element fully inside the identity (disk) block: coordinate indices of
    /// its 12 DOFs.
    Direct([u32; 12]),
    /// Element inside a reduced block: 12 x m slice of the block basis plus
    /// the block index.
    Projected { block: usize, rows: DMatrix<f64> },
}

impl ReducedSim {
    pub fn new(rmodel: ReducedModel, material: &MaterialParams) -> Result<ReducedSim, MorError> {
        let model = FemModel::from_robot(&rmodel.robot, material)
            .map_err(|e| MorError::Fem(e.to_string()))?;
        let dim = rmodel.dim;

        // Reduced mass and gravity.
        let mut m_red = DMatrix::zeros(dim, dim);
        let mut gravity = DVector::zeros(dim);
        let g = material.gravity;
        for block in &rmodel.blocks {
            match &block.basis {
                BlockBasis::Identity => {
                    for (k, ci) in block.coord_range.clone().enumerate() {
                        let node = block.node_range.start + k / 3;
                        let m = model.node_mass[node];
                        m_red[(ci, ci)] = m;
                        gravity[ci] = m * g[k % 3];
                    }
                }
                BlockBasis::Reduced(phi) => {
                    let mcount = phi.ncols();
                    let c0 = block.coord_range.start;
                    for a in 0..mcount {
                        for b in a..mcount {
                            let mut acc = 0.0;
                            for (k, node) in block.node_range.clone().enumerate() {
                                let m = model.node_mass[node];
                                for c in 0..3 {
                                    acc += m * phi[(3 * k + c, a)] * phi[(3 * k + c, b)];
                                }
                            }
                            m_red[(c0 + a, c0 + b)] = acc;
                            m_red[(c0 + b, c0 + a)] = acc;
                        }
                        let mut gv = 0.0;
                        for (k, node) in block.node_range.clone().enumerate() {
                            let m = model.node_mass[node];
                            for c in 0..3 {
                                gv += m * g[c] * phi[(3 * k + c, a)];
                            }
                        }
                        gravity[c0 + a] = gv;
                    }
                }
            }
        }

        // Constant reduced tie stiffness: k [phi_a; -phi_b]^T [phi_a; -phi_b]
        // accumulated over tie pairs, where phi_x is the 3 x dim row slice of
        // the block-diagonal basis at node x.
        let mut k_ties = DMatrix::zeros(dim, dim);
        for tie in &model.ties {
            let rows_a = node_rows(&rmodel, tie.a);
            let rows_b = node_rows(&rmodel, tie.b);
            // difference operator d = phi_a - phi_b as sparse triples
            let mut d: Vec<(usize, [f64; 3])> = Vec::new();
            merge_rows(&rows_a, 1.0, &mut d);
            merge_rows(&rows_b, -1.0, &mut d);
            for (ci, vi) in &d {
                for (cj, vj) in &d {
                    let mut acc = 0.0;
                    for c in 0..3 {
                        acc += vi[c] * vj[c];
                    }
                    k_ties[(*ci, *cj)] += tie.stiffness * acc;
                }
            }
        }

        // Per-element projections.
        let mut elem_phi = Vec::with_capacity(rmodel.integration.len());
        for &(ei, _) in &rmodel.integration {
            let nodes = model.elements[ei as usize].nodes;
            let (bi, _) = rmodel.block_of_node(nodes[0]);
            let block = &rmodel.blocks[bi];
            debug_assert!(nodes.iter().all(|&n| block.node_range.contains(&(n as usize))));
            match &block.basis {
                BlockBasis::Identity => {
                    let mut idx = [0u32; 12];
                    for (a, &n) in nodes.iter().enumerate() {
                        let local = n as usize - block.node_range.start;
                        for c in 0..3 {
                            idx[3 * a + c] = (block.coord_range.start + 3 * local + c) as u32;
                        }
                    }
                    elem_phi.push(ElemProjection::Direct(idx));
                }
                BlockBasis::Reduced(phi) => {
                    let m = phi.ncols();
                    let mut rows = DMatrix::zeros(12, m);
                    for (a, &n) in nodes.iter().enumerate() {
                        let local = n as usize - block.node_range.start;
                        for c in 0..3 {
                            for j in 0..m {
                                rows[(3 * a + c, j)] = phi[(3 * local + c, j)];
                            }
                        }
                    }
                    elem_phi.push(ElemProjection::Projected { block: bi, rows });
                }
            }
        }

        let dof = model.dof();
        Ok(ReducedSim {
            model,
            rmodel,
            solver: ReducedSolverConfig::default(),
            dim,
            m_red,
            k_ties,
            gravity,
            elem_phi,
            q_full: vec![0.0; dof],
            v_full: vec![0.0; dof],
            f_full: vec![0.0; dof],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Reconstructs the full-order view of a reduced state.
    pub fn reconstruct(&self, state: &ReducedState) -> FullOrderState {
        let dof = self.model.dof();
        let mut q = vec![0.0; dof];
        self.rmodel.reconstruct_q(&state.alpha, &mut q);
        let mut v = vec![0.0; dof];
        self.rmodel.accumulate_displacement(&state.alpha_dot, &mut v);
        FullOrderState {
            q: DVector::from_vec(q),
            v: DVector::from_vec(v),
            t: state.t,
        }
    }

    /// One reduced implicit step, mirroring the full-order scheme.
    pub fn step(
        &mut self,
        state: &ReducedState,
        pressures: &PressureCommand,
        contact: &ContactConfig,
        h: f64,
    ) -> Result<ReducedState, MorError> {
        self.step_at_depth(state, pressures, contact, h, 0)
    }

    fn step_at_depth(
        &mut self,
        state: &ReducedState,
        pressures: &PressureCommand,
        contact: &ContactConfig,
        h: f64,
        depth: u32,
    ) -> Result<ReducedState, MorError> {
        match self.step_once(state, pressures, contact, h) {
            Ok(next) => {
                let v_spike = self.max_velocity(&next);
                let v_prev = self.max_velocity(state);
                let spike = v_spike > self.solver.velocity_limit && v_spike > 2.0 * v_prev;
                if !spike || depth >= self.solver.max_substep_depth {
                    return Ok(next);
                }
            }
            Err(MorError::Fem(_)) if depth < self.solver.max_substep_depth => {}
            Err(e) => return Err(e),
        }
        let half = self.step_at_depth(state, pressures, contact, h / 2.0, depth + 1)?;
        self.step_at_depth(&half, pressures, contact, h / 2.0, depth + 1)
    }

    fn max_velocity(&self, state: &ReducedState) -> f64 {
        let mut v = vec![0.0; self.model.dof()];
        self.rmodel.accumulate_displacement(&state.alpha_dot, &mut v);
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    fn step_once(
        &mut self,
        state: &ReducedState,
        pressures: &PressureCommand,
        contact: &ContactConfig,
        h: f64,
    ) -> Result<ReducedState, MorError> {
        let dim = self.dim;
        let mat = &self.model.material;
        let alpha_ray = mat.rayleigh_alpha;
        let beta = mat.rayleigh_beta;
        let k_factor = h * beta + h * h;

        // Reconstruct the full view once per step.
        self.rmodel.reconstruct_q(&state.alpha, &mut self.q_full);
        self.v_full.fill(0.0);
        self.rmodel.accumulate_displacement(&state.alpha_dot, &mut self.v_full);

        let mut a = self.m_red.clone() * (1.0 + h * alpha_ray);
        a += &self.k_ties * k_factor;

        let mut b = DVector::zeros(dim);
        // Gravity and mass damping.
        b.axpy(h, &self.gravity, 1.0);
        if alpha_ray != 0.0 {
            b -= (&self.m_red * &state.alpha_dot) * (h * alpha_ray);
        }
        // Ties: forces are exactly linear in alpha, damping in alpha_dot.
        b -= (&self.k_ties * &state.alpha) * h;
        b -= (&self.k_ties * &state.alpha_dot) * k_factor;

        // Weighted element assembly on the integration domain.
        for (idx, &(ei, w)) in self.rmodel.integration.iter().enumerate() {
            let (k_hat, f_int) = self
                .model
                .element_response(ei as usize, &self.q_full)
                .map_err(|e| MorError::Fem(e.to_string()))?;
            let nodes = self.model.elements[ei as usize].nodes;
            let mut v_e = crate::fem::element::ElemVec::zeros();
            for (ni, &node) in nodes.iter().enumerate() {
                for c in 0..3 {
                    v_e[3 * ni + c] = self.v_full[3 * node as usize + c];
                }
            }
            let kv = k_hat * v_e;
            let rhs_e = f_int * (h * w) - kv * (k_factor * w);
            match &self.elem_phi[idx] {
                ElemProjection::Direct(coords) => {
                    for r in 0..12 {
                        b[coords[r] as usize] += rhs_e[r];
                        for c in 0..12 {
                            a[(coords[r] as usize, coords[c] as usize)] +=
                                k_factor * w * k_hat[(r, c)];
                        }
                    }
                }
                ElemProjection::Projected { block, rows } => {
                    let c0 = self.rmodel.blocks[*block].coord_range.start;
                    let m = rows.ncols();
                    // a += (k_factor w) rows^T k_hat rows; b += rows^T rhs_e
                    let k_rows = k_hat * rows; // 12 x m
                    for i in 0..m {
                        for j in 0..m {
                            let mut acc = 0.0;
                            for r in 0..12 {
                                acc += rows[(r, i)] * k_rows[(r, j)];
                            }
                            a[(c0 + i, c0 + j)] += k_factor * w * acc;
                        }
                        let mut acc = 0.0;
                        for r in 0..12 {
                            acc += rows[(r, i)] * rhs_e[r];
                        }
                        b[c0 + i] += acc;
                    }
                }
            }
        }

        // Pressure loads on reconstructed geometry, projected.
        self.f_full.fill(0.0);
        self.model
            .accumulate_pressure_forces(&self.q_full, pressures, &mut self.f_full)
            .map_err(|e| MorError::Fem(e.to_string()))?;
        for x in self.f_full.iter_mut() {
            *x *= h;
        }
        self.rmodel.project(&self.f_full, &mut b);

        // Contact on reconstructed candidates: exact forces plus implicit
        // normal-spring and tangential-damping terms as low-rank updates.
        let pts = contact_points(
            &self.model.contact_candidates,
            &self.q_full,
            &self.v_full,
            contact,
        );
        self.f_full.fill(0.0);
        for cp in &pts {
            let i = 3 * cp.node as usize;
            for c in 0..3 {
                self.f_full[i + c] += h * cp.force[c];
            }
        }
        self.rmodel.project(&self.f_full, &mut b);
        let hhk = h * h * contact.normal_stiffness;
        for cp in &pts {
            let rows = node_rows(&self.rmodel, cp.node);
            // b_z -= hhk * v_z (companion of the implicit normal spring).
            let vz = self.v_full[3 * cp.node as usize + 2];
            for (ci, r) in &rows {
                b[*ci] -= hhk * vz * r[2];
            }
            // Rank-1 updates of A per axis.
            let coeff = [
                h * cp.tangential_damping,
                h * cp.tangential_damping,
                hhk + h * contact.normal_damping,
            ];
            for axis in 0..3 {
                if coeff[axis] == 0.0 {
                    continue;
                }
                for (ci, ri) in &rows {
                    if ri[axis] == 0.0 {
                        continue;
                    }
                    for (cj, rj) in &rows {
                        a[(*ci, *cj)] += coeff[axis] * ri[axis] * rj[axis];
                    }
                }
            }
        }

        let chol = Cholesky::new(a).ok_or(MorError::ReducedSolveFailed)?;
        let dalpha_dot = chol.solve(&b);
        let mut next = state.clone();
        next.alpha_dot += dalpha_dot;
        next.alpha.axpy(h, &next.alpha_dot, 1.0);
        next.t += h;
        Ok(next)
    }
}

/// The 3 x dim basis rows of a node as sparse (coord, 3-vector) pairs.
fn node_rows(rmodel: &ReducedModel, node: u32) -> Vec<(usize, [f64; 3])> {
    let (bi, local) = rmodel.block_of_node(node);
    let block = &rmodel.blocks[bi];
    match &block.basis {
        BlockBasis::Identity => (0..3)
            .map(|c| {
                let mut v = [0.0; 3];
                v[c] = 1.0;
                (block.coord_range.start + 3 * local + c, v)
            })
            .collect(),
        BlockBasis::Reduced(phi) => block
            .coord_range
            .clone()
            .enumerate()
            .map(|(j, ci)| {
                (ci, [phi[(3 * local, j)], phi[(3 * local + 1, j)], phi[(3 * local + 2, j)]])
            })
            .collect(),
    }
}

fn merge_rows(rows: &[(usize, [f64; 3])], sign: f64, out: &mut Vec<(usize, [f64; 3])>) {
    for (ci, v) in rows {
        out.push((*ci, [sign * v[0], sign * v[1], sign * v[2]]));
    }
}
