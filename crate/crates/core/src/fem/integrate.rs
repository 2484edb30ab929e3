//! Implicit time stepping of the full-order model.
//!
//! One backward-Euler step with a single linearization solves
//!
//! ```text
//! (M + h C + h^2 K) dv = h (f_el + f_ext - C v) - h^2 K v  (+ contact terms)
//! v <- v + dv,  q <- q + h v
//! ```
//!
//! with `C = alpha M + beta K` Rayleigh damping. Contact forces enter the
//! right-hand side; their normal-spring and stick-friction linearizations are
//! added to the diagonal so large penalty stiffnesses stay stable.

use nalgebra::DVector;

use super::contact::{contact_points, ContactConfig};
use super::model::{FemModel, PressureCommand};
use super::sparse::{pcg_with, CgScratch, Csr, Ic0, Precond};
use super::FemError;

/// Node positions, velocities, and time of the full-order simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct FullOrderState {
    /// Positions, mm, flattened 3 per node.
    pub q: DVector<f64>,
    /// Velocities, mm/s.
    pub v: DVector<f64>,
    /// Time, s.
    pub t: f64,
}

impl FullOrderState {
    pub fn rest(model: &FemModel) -> Self {
        FullOrderState {
            q: DVector::from_column_slice(&model.rest),
            v: DVector::zeros(model.dof()),
            t: 0.0,
        }
    }

    pub fn node(&self, node: u32) -> nalgebra::Point3<f64> {
        FemModel::node_point(self.q.as_slice(), node)
    }
}

/// The linear system of one implicit step. The constraint block of the
/// underlying formulation is kept in the data model for future constraint
/// handling but is unused by the penalty-based pipeline.
pub struct SystemMatrices {
    pub a: Csr,
    pub b: DVector<f64>,
    pub constraints: Option<ConstraintBlock>,
}

/// Placeholder for `H^T lambda` constraint rows.
pub struct ConstraintBlock {
    pub jacobian_rows: Vec<Vec<(u32, f64)>>,
    pub multipliers: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub cg_rel_tol: f64,
    pub cg_max_iters: usize,
    /// Velocity spikes beyond this trigger substepping, mm/s.
    pub velocity_limit: f64,
    pub max_substep_depth: u32,
    /// Steps between incomplete-Cholesky refreshes.
    pub refactor_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cg_rel_tol: 1e-6,
            cg_max_iters: 20_000,
            velocity_limit: 1000.0,
            max_substep_depth: 5,
            refactor_every: 8,
        }
    }
}

/// Full-order simulator: owns the model, the reusable matrix pattern, solver
/// scratch, and the previous solution for warm starts. One instance per
/// rollout worker; instances are independent.
pub struct FullOrderSim {
    pub model: FemModel,
    pub solver: SolverConfig,
    matrix: Csr,
    scratch: CgScratch,
    dv: DVector<f64>,
    // Incomplete-Cholesky preconditioner, refreshed on a fixed cadence plus
    // whenever CG iteration counts drift up; stale factors stay valid.
    ic: Option<Ic0>,
    steps_since_refactor: usize,
    iters_at_refresh: usize,
    /// CG iterations of the most recent solve, for diagnostics.
    pub last_cg_iters: usize,
}

impl FullOrderSim {
    pub fn new(model: FemModel) -> Self {
        let matrix = model.pattern.clone();
        let n = model.dof();
        FullOrderSim {
            model,
            solver: SolverConfig::default(),
            matrix,
            scratch: CgScratch::new(n),
            dv: DVector::zeros(n),
            ic: None,
            steps_since_refactor: usize::MAX / 2,
            iters_at_refresh: 0,
            last_cg_iters: 0,
        }
    }

    /// Assembles `A = M + h C + h^2 K` and the force-side `b` (elastic,
    /// damping, gravity, and pressure loads; contact is added by [`step`]).
    pub fn assemble_system(
        &mut self,
        state: &FullOrderState,
        pressures: &PressureCommand,
        h: f64,
    ) -> Result<SystemMatrices, FemError> {
        if !(h > 0.0) {
            return Err(FemError::BadInput("timestep must be positive".into()));
        }
        let model = &self.model;
        let dof = model.dof();
        let alpha = model.material.rayleigh_alpha;
        let beta = model.material.rayleigh_beta;
        let k_factor = h * beta + h * h;

        let mut a = model.pattern.clone();
        let mut b = DVector::zeros(dof);
        let q = state.q.as_slice();
        let v = state.v.as_slice();

        // Mass, gravity, and mass-proportional damping.
        let g = model.material.gravity;
        for node in 0..model.num_nodes {
            let m = model.node_mass[node];
            let i = 3 * node;
            for c in 0..3 {
                a.add(i + c, i + c, m * (1.0 + h * alpha));
                b[i + c] += h * (m * g[c] - alpha * m * v[i + c]);
            }
        }

        // Elements: stiffness into A, internal force and stiffness-damping
        // into b.
        for ei in 0..model.elements.len() {
            let (k_hat, f_int) = model.element_response(ei, q)?;
            model.scatter_element(ei, &k_hat, k_factor, &mut a);
            let nodes = model.elements[ei].nodes;
            let mut v_e = super::element::ElemVec::zeros();
            for (ni, &node) in nodes.iter().enumerate() {
                for c in 0..3 {
                    v_e[3 * ni + c] = v[3 * node as usize + c];
                }
            }
            let kv = k_hat * v_e;
            for (ni, &node) in nodes.iter().enumerate() {
                for c in 0..3 {
                    b[3 * node as usize + c] += h * f_int[3 * ni + c] - k_factor * kv[3 * ni + c];
                }
            }
        }

        // Tie springs.
        for (ti, tie) in model.ties.iter().enumerate() {
            model.scatter_tie(ti, k_factor, &mut a);
            let f = model.tie_force(tie, q);
            let (ia, ib) = (3 * tie.a as usize, 3 * tie.b as usize);
            for c in 0..3 {
                let dv_rel = v[ia + c] - v[ib + c];
                let damp = k_factor * tie.stiffness * dv_rel;
                b[ia + c] += h * f[c] - damp;
                b[ib + c] += -h * f[c] + damp;
            }
        }

        // Corotated dead pressure loads.
        let mut f_p = vec![0.0; dof];
        model.accumulate_pressure_forces(q, pressures, &mut f_p)?;
        for i in 0..dof {
            b[i] += h * f_p[i];
        }

        Ok(SystemMatrices { a, b, constraints: None })
    }

    /// One implicit step. Deterministic for identical inputs.
    ///
    /// A step whose solution spikes past `solver.velocity_limit` (or inverts
    /// an element mid-transient) is retried as two half steps, recursively up
    /// to `solver.max_substep_depth`; the result is still a single advance of
    /// `h`. This keeps violent pressure or impact transients inside the
    /// stability envelope of the single-linearization scheme.
    pub fn step(
        &mut self,
        state: &FullOrderState,
        pressures: &PressureCommand,
        contact: &ContactConfig,
        h: f64,
    ) -> Result<FullOrderState, FemError> {
        self.step_at_depth(state, pressures, contact, h, 0)
    }

    fn step_at_depth(
        &mut self,
        state: &FullOrderState,
        pressures: &PressureCommand,
        contact: &ContactConfig,
        h: f64,
        depth: u32,
    ) -> Result<FullOrderState, FemError> {
        match self.step_once(state, pressures, contact, h) {
            Ok(next) => {
                let spike = next.v.amax() > self.solver.velocity_limit
                    && next.v.amax() > 2.0 * state.v.amax();
                if !spike || depth >= self.solver.max_substep_depth {
                    return Ok(next);
                }
            }
            Err(FemError::InvertedElement { .. }) if depth < self.solver.max_substep_depth => {}
            Err(e) => return Err(e),
        }
        let half = self.step_at_depth(state, pressures, contact, h / 2.0, depth + 1)?;
        self.step_at_depth(&half, pressures, contact, h / 2.0, depth + 1)
    }

    fn step_once(
        &mut self,
        state: &FullOrderState,
        pressures: &PressureCommand,
        contact: &ContactConfig,
        h: f64,
    ) -> Result<FullOrderState, FemError> {
        let SystemMatrices { mut a, mut b, .. } = self.assemble_system(state, pressures, h)?;

        let pts = contact_points(
            &self.model.contact_candidates,
            state.q.as_slice(),
            state.v.as_slice(),
            contact,
        );
        for cp in &pts {
            let i = 3 * cp.node as usize;
            for c in 0..3 {
                b[i + c] += h * cp.force[c];
            }
            // Friction is -d_eff * v_t with d_eff frozen at the step start,
            // so it goes implicit via the tangential diagonal in every
            // regime; a binary stick/slide switch here acts as a parametric
            // pump on light surface nodes. The normal spring contributes its
            // h^2 K linearization with the matching force-side term.
            let hhk = h * h * contact.normal_stiffness;
            a.add(i + 2, i + 2, hhk + h * contact.normal_damping);
            b[i + 2] -= hhk * state.v[i + 2];
            a.add(i, i, h * cp.tangential_damping);
            a.add(i + 1, i + 1, h * cp.tangential_damping);
        }

        if self.steps_since_refactor >= self.solver.refactor_every {
            self.ic = Ic0::factor(&a);
            if self.ic.is_none() && std::env::var("SOLVER_TRACE").is_ok() {
                eprintln!("ic0 factorization broke down; falling back to SGS");
            }
            self.steps_since_refactor = 0;
            self.iters_at_refresh = 0;
        }
        let precond = match &self.ic {
            Some(ic) => Precond::Ic(ic),
            None => Precond::Sgs,
        };
        // Warm-start from the previous step's solution.
        let iters = pcg_with(
            &a,
            &b,
            &mut self.dv,
            self.solver.cg_rel_tol,
            self.solver.cg_max_iters,
            &mut self.scratch,
            &precond,
        )
        .map_err(FemError::Solve)?;
        self.last_cg_iters = iters;
        self.steps_since_refactor += 1;
        if self.iters_at_refresh == 0 {
            self.iters_at_refresh = iters.max(1);
        } else if iters > 2 * self.iters_at_refresh + 8 {
            // Preconditioner has gone stale; rebuild next step.
            self.steps_since_refactor = usize::MAX / 2;
        }

        self.matrix = a;
        let mut next = state.clone();
        next.v += &self.dv;
        next.q.axpy(h, &next.v, 1.0);
        next.t += h;
        Ok(next)
    }

    /// Advances `steps` substeps under a constant pressure command.
    pub fn run(
        &mut self,
        state: &FullOrderState,
        pressures: &PressureCommand,
        contact: &ContactConfig,
        h: f64,
        steps: usize,
    ) -> Result<FullOrderState, FemError> {
        let mut s = state.clone();
        for _ in 0..steps {
            s = self.step(&s, pressures, contact, h)?;
        }
        Ok(s)
    }

    /// Last assembled system matrix (after a step), for inspection in tests.
    pub fn last_matrix(&self) -> &Csr {
        &self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::material::{ElasticModel, MaterialParams};
    use crate::fem::model::TieSpring;
    use nalgebra::{Point3, Vector3};

    /// A small bar of n x 1 x 1 mm cells.
    pub(crate) fn bar_model(n: usize, material: MaterialParams) -> (FemModel, Vec<Point3<f64>>) {
        use crate::geometry::{generate_bar_part, Region};
        let part = generate_bar_part(n, 1, 1, 1.0, Region::Silicone);
        let nodes = part.mesh.nodes.clone();
        let model = FemModel::from_part(&part, &material).unwrap();
        (model, nodes)
    }

    #[test]
    fn free_fall_first_step_is_h_g() {
        let mut mat = MaterialParams::default();
        mat.rayleigh_alpha = 0.0; // mass damping would scale dv
        let (model, _) = bar_model(3, mat.clone());
        let mut sim = FullOrderSim::new(model);
        sim.solver.cg_rel_tol = 1e-13;
        let state = FullOrderState::rest(&sim.model);
        let h = 0.01;
        let next = sim
            .step(&state, &PressureCommand::zeros_regulators(3), &ContactConfig { floor_z: -1e9, ..Default::default() }, h)
            .unwrap();
        let g = mat.gravity;
        for node in 0..sim.model.num_nodes {
            let dv = Vector3::new(
                next.v[3 * node],
                next.v[3 * node + 1],
                next.v[3 * node + 2],
            );
            assert!((dv - h * g).norm() <= 1e-10 * (h * g).norm(), "node {node}: {dv:?}");
        }
    }

    #[test]
    fn rest_state_stays_at_rest_without_loads() {
        let mut mat = MaterialParams::default();
        mat.gravity = Vector3::zeros();
        let (model, _) = bar_model(3, mat);
        let mut sim = FullOrderSim::new(model);
        let state = FullOrderState::rest(&sim.model);
        let next = sim
            .step(&state, &PressureCommand::zeros_regulators(3), &ContactConfig::default(), 0.01)
            .unwrap();
        assert!((next.q - state.q).norm() < 1e-9);
        assert!(next.v.norm() < 1e-9);
    }

    #[test]
    fn assembled_matrix_is_symmetric_and_positive_definite() {
        let (model, _) = bar_model(4, MaterialParams::default());
        let mut sim = FullOrderSim::new(model);
        let mut state = FullOrderState::rest(&sim.model);
        // Perturb positions so the corotational path is exercised.
        for i in 0..state.q.len() {
            state.q[i] += 0.01 * ((i * 2654435761) % 97) as f64 / 97.0;
        }
        let sys = sim
            .assemble_system(&state, &PressureCommand::zeros_regulators(3), 0.01)
            .unwrap();
        assert!(sys.a.symmetry_defect() < 1e-8);
        let dense = sys.a.to_dense();
        assert!(dense.cholesky().is_some(), "A must be positive definite");
    }

    #[test]
    fn tie_springs_hold_two_bars_together() {
        // Two single-cell bars stacked with a tie; under gravity with the
        // bottom clamped by contact, the tie keeps them attached.
        let mat = MaterialParams::default();
        let (model_a, nodes) = bar_model(1, mat.clone());
        // Build a combined model manually: bar at z in [0,1] and bar at
        // z in [1.5, 2.5] tied at the nearest corners.
        let mut all_nodes = nodes.clone();
        let offset = all_nodes.len() as u32;
        for p in &nodes {
            all_nodes.push(Point3::new(p.x, p.y, p.z + 1.5));
        }
        let mut tets = model_a.elements.iter().map(|e| e.nodes).collect::<Vec<_>>();
        let upper: Vec<[u32; 4]> =
            tets.iter().map(|t| t.map(|v| v + offset)).collect();
        tets.extend(upper);
        let elastic = vec![mat.silicone.lame(); tets.len()];
        let density = vec![0.001; tets.len()];
        // Tie each bottom corner of the upper bar to the matching lower
        // corner, as assembly does across a whole attachment face.
        let mut ties = Vec::new();
        for (i, p) in nodes.iter().enumerate() {
            if p.z.abs() < 1e-9 {
                ties.push(TieSpring {
                    a: offset + i as u32,
                    b: i as u32,
                    rest_offset: all_nodes[offset as usize + i] - all_nodes[i],
                    stiffness: mat.tie_stiffness,
                });
            }
        }
        let candidates: Vec<u32> = (0..all_nodes.len() as u32).collect();
        let model = FemModel::from_components(
            &all_nodes,
            &tets,
            &elastic,
            &density,
            ties,
            vec![],
            candidates,
            MaterialParams { elastic_model: ElasticModel::Linear, ..mat },
        )
        .unwrap();
        let mut sim = FullOrderSim::new(model);
        let mut state = FullOrderState::rest(&sim.model);
        for _ in 0..200 {
            state = sim
                .step(&state, &PressureCommand::zeros_regulators(3), &ContactConfig::default(), 0.005)
                .unwrap();
        }
        // The tied corner of the upper bar must stay near its partner
        // (tie stretch far smaller than the 0.5mm gap it would fall).
        let pa = state.node(sim.model.ties[0].a);
        let pb = state.node(sim.model.ties[0].b);
        let stretch = ((pa - pb) - sim.model.ties[0].rest_offset).norm();
        assert!(stretch < 0.05, "tie stretched {stretch} mm");
    }
}
