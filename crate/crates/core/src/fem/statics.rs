//! Static equilibrium solves, for calibration benches and beam validation.

use nalgebra::{DVector, Vector3};

use super::model::{FemModel, PressureCommand};
use super::sparse::{pcg, CgScratch};
use super::{FemError, FullOrderState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaticMode {
    /// Single solve of `K u = f_ext` about the rest state.
    Linear,
    /// Incremental-load quasi-Newton iteration with the corotational tangent.
    Nonlinear,
}

/// A static problem: Dirichlet-fixed nodes, point loads, cavity pressures.
#[derive(Debug, Clone)]
pub struct StaticProblem {
    pub fixed_nodes: Vec<u32>,
    pub loads: Vec<(u32, Vector3<f64>)>,
    pub pressures_kpa: Vec<f64>,
    pub include_gravity: bool,
    pub mode: StaticMode,
    pub load_steps: usize,
    pub tol_rel: f64,
    pub max_newton_iters: usize,
}

impl Default for StaticProblem {
    fn default() -> Self {
        StaticProblem {
            fixed_nodes: Vec::new(),
            loads: Vec::new(),
            pressures_kpa: Vec::new(),
            include_gravity: false,
            mode: StaticMode::Nonlinear,
            load_steps: 6,
            tol_rel: 1e-5,
            max_newton_iters: 60,
        }
    }
}

/// Solves for static equilibrium: `||f_int + f_ext||` (over free DOFs) below
/// tolerance. The fixed nodes must pin all rigid modes.
pub fn static_solve(model: &FemModel, problem: &StaticProblem) -> Result<FullOrderState, FemError> {
    if problem.fixed_nodes.is_empty() {
        return Err(FemError::BadInput("static solve requires fixed nodes".into()));
    }
    let dof = model.dof();
    let mut fixed = vec![false; dof];
    for &n in &problem.fixed_nodes {
        for c in 0..3 {
            fixed[3 * n as usize + c] = true;
        }
    }

    match problem.mode {
        StaticMode::Linear => {
            let q0 = DVector::from_column_slice(&model.rest);
            let f = external_forces(model, q0.as_slice(), problem, 1.0)?;
            let mut a = model.pattern.clone();
            for ei in 0..model.elements.len() {
                let k = model.elements[ei].stiffness;
                model.scatter_element(ei, &k, 1.0, &mut a);
            }
            for ti in 0..model.ties.len() {
                model.scatter_tie(ti, 1.0, &mut a);
            }
            let diag_scale = typical_diag(&a);
            let mut b = f;
            for (i, is_fixed) in fixed.iter().enumerate() {
                if *is_fixed {
                    a.apply_dirichlet(i, diag_scale);
                    b[i] = 0.0;
                }
            }
            let mut u = DVector::zeros(dof);
            let mut scratch = CgScratch::new(dof);
            pcg(&a, &b, &mut u, 1e-10, 200_000, &mut scratch).map_err(FemError::Solve)?;
            Ok(FullOrderState { q: q0 + u, v: DVector::zeros(dof), t: 0.0 })
        }
        StaticMode::Nonlinear => {
            let mut q = DVector::from_column_slice(&model.rest);
            let mut scratch = CgScratch::new(dof);
            let steps = problem.load_steps.max(1);
            for step in 1..=steps {
                let scale = step as f64 / steps as f64;
                newton_solve(model, problem, scale, &fixed, &mut q, &mut scratch)?;
            }
            Ok(FullOrderState { q, v: DVector::zeros(dof), t: 0.0 })
        }
    }
}

fn newton_solve(
    model: &FemModel,
    problem: &StaticProblem,
    scale: f64,
    fixed: &[bool],
    q: &mut DVector<f64>,
    scratch: &mut CgScratch,
) -> Result<(), FemError> {
    let dof = model.dof();
    for _ in 0..problem.max_newton_iters {
        let (a, r, f_ext_norm) = assemble_tangent(model, problem, scale, fixed, q.as_slice())?;
        let r_norm = r.norm();
        let target = problem.tol_rel * f_ext_norm.max(1.0);
        if r_norm <= target {
            return Ok(());
        }
        let mut delta = DVector::zeros(dof);
        pcg(&a, &r, &mut delta, 1e-6, 50_000, scratch).map_err(FemError::Solve)?;

        // Backtracking on the force residual only; the warped tangent is
        // approximate, so full steps can overshoot.
        let mut step = 1.0;
        for _ in 0..8 {
            let trial = &*q + &delta * step;
            let r_trial = residual(model, problem, scale, fixed, trial.as_slice())?;
            if r_trial.norm() < r_norm {
                *q = trial;
                break;
            }
            step *= 0.5;
            if step < 0.01 {
                // Take the damped step; load stepping limits the damage.
                *q += &delta * step;
                break;
            }
        }
    }
    let r = residual(model, problem, scale, fixed, q.as_slice())?;
    let f_ext_norm = external_forces(model, q.as_slice(), problem, scale)?.norm();
    if r.norm() <= problem.tol_rel * 10.0 * f_ext_norm.max(1.0) {
        return Ok(());
    }
    Err(FemError::StaticsNoConvergence { residual: r.norm() })
}

/// Force residual `f_int + scale * f_ext` with fixed DOFs zeroed.
fn residual(
    model: &FemModel,
    problem: &StaticProblem,
    scale: f64,
    fixed: &[bool],
    q: &[f64],
) -> Result<DVector<f64>, FemError> {
    let mut r = external_forces(model, q, problem, scale)?;
    for ei in 0..model.elements.len() {
        let (_, f_int) = model.element_force_only(ei, q)?;
        for (ni, &node) in model.elements[ei].nodes.iter().enumerate() {
            for c in 0..3 {
                r[3 * node as usize + c] += f_int[3 * ni + c];
            }
        }
    }
    for tie in &model.ties {
        let f = model.tie_force(tie, q);
        for c in 0..3 {
            r[3 * tie.a as usize + c] += f[c];
            r[3 * tie.b as usize + c] -= f[c];
        }
    }
    for (i, is_fixed) in fixed.iter().enumerate() {
        if *is_fixed {
            r[i] = 0.0;
        }
    }
    Ok(r)
}

/// Tangent (with Dirichlet rows) and residual.
fn assemble_tangent(
    model: &FemModel,
    problem: &StaticProblem,
    scale: f64,
    fixed: &[bool],
    q: &[f64],
) -> Result<(super::sparse::Csr, DVector<f64>, f64), FemError> {
    let dof = model.dof();
    let mut a = model.pattern.clone();
    let mut r = external_forces(model, q, problem, scale)?;
    let f_ext_norm = r.norm();
    for ei in 0..model.elements.len() {
        let (k_hat, f_int) = model.element_response(ei, q)?;
        model.scatter_element(ei, &k_hat, 1.0, &mut a);
        for (ni, &node) in model.elements[ei].nodes.iter().enumerate() {
            for c in 0..3 {
                r[3 * node as usize + c] += f_int[3 * ni + c];
            }
        }
    }
    for (ti, tie) in model.ties.iter().enumerate() {
        model.scatter_tie(ti, 1.0, &mut a);
        let f = model.tie_force(tie, q);
        for c in 0..3 {
            r[3 * tie.a as usize + c] += f[c];
            r[3 * tie.b as usize + c] -= f[c];
        }
    }
    let diag_scale = typical_diag(&a);
    for i in 0..dof {
        if fixed[i] {
            a.apply_dirichlet(i, diag_scale);
            r[i] = 0.0;
        }
    }
    Ok((a, r, f_ext_norm))
}

fn external_forces(
    model: &FemModel,
    q: &[f64],
    problem: &StaticProblem,
    scale: f64,
) -> Result<DVector<f64>, FemError> {
    let dof = model.dof();
    let mut f = vec![0.0; dof];
    let scaled: Vec<f64> = problem.pressures_kpa.iter().map(|p| p * scale).collect();
    model.accumulate_pressure_forces(q, &PressureCommand::PerLeg(scaled), &mut f)?;
    let mut out = DVector::from_vec(f);
    for (node, load) in &problem.loads {
        for c in 0..3 {
            out[3 * *node as usize + c] += scale * load[c];
        }
    }
    if problem.include_gravity {
        let g = model.material.gravity;
        for node in 0..model.num_nodes {
            let m = model.node_mass[node];
            for c in 0..3 {
                out[3 * node + c] += scale * m * g[c];
            }
        }
    }
    Ok(out)
}

fn typical_diag(a: &super::sparse::Csr) -> f64 {
    let mut max = 0.0f64;
    for i in 0..a.n {
        max = max.max(a.diag(i).abs());
    }
    if max == 0.0 {
        1.0
    } else {
        max
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::material::{ElasticModel, MaterialParams};
    use crate::geometry::{generate_bar_part, Region};

    fn clamped_bar(mode: ElasticModel) -> (FemModel, Vec<u32>, Vec<u32>) {
        let part = generate_bar_part(10, 2, 2, 1.0, Region::Silicone);
        let mat = MaterialParams { elastic_model: mode, ..Default::default() };
        let model = FemModel::from_part(&part, &mat).unwrap();
        let mut clamp = Vec::new();
        let mut tip = Vec::new();
        for (i, p) in part.mesh.nodes.iter().enumerate() {
            if p.x.abs() < 1e-9 {
                clamp.push(i as u32);
            }
            if (p.x - 10.0).abs() < 1e-9 {
                tip.push(i as u32);
            }
        }
        (model, clamp, tip)
    }

    #[test]
    fn zero_load_returns_rest() {
        let (model, clamp, _) = clamped_bar(ElasticModel::Corotational);
        let problem = StaticProblem { fixed_nodes: clamp, ..Default::default() };
        let state = static_solve(&model, &problem).unwrap();
        let q0 = DVector::from_column_slice(&model.rest);
        assert!((state.q - q0).norm() < 1e-9);
    }

    #[test]
    fn linear_mode_is_linear_in_load() {
        let (model, clamp, tip) = clamped_bar(ElasticModel::Linear);
        let load = Vector3::new(0.0, 0.0, -1000.0);
        let solve = |s: f64| {
            let problem = StaticProblem {
                fixed_nodes: clamp.clone(),
                loads: tip.iter().map(|&n| (n, load * s)).collect(),
                mode: StaticMode::Linear,
                ..Default::default()
            };
            static_solve(&model, &problem).unwrap()
        };
        let s1 = solve(1.0);
        let s2 = solve(2.0);
        let q0 = DVector::from_column_slice(&model.rest);
        let u1 = s1.q - &q0;
        let u2 = s2.q - &q0;
        assert!((u2 - &u1 * 2.0).norm() <= 1e-8 * u1.norm());
    }

    #[test]
    fn missing_constraints_rejected() {
        let (model, _, _) = clamped_bar(ElasticModel::Linear);
        let err = static_solve(&model, &StaticProblem::default()).unwrap_err();
        assert!(matches!(err, FemError::BadInput(_)));
    }
}
