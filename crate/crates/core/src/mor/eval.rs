//! Reduction quality evaluation: the node-position error metric, the test
//! animation suite, and the tolerance grid search.

use nalgebra::DVector;

use super::pod::pod_basis;
use super::reduced::{build_reduced_design, PartReduction};
use super::snapshots::gray_code_vertices;
use super::step::{ReducedSim, ReducedState};
use super::{ecsw, MorError, PartSnapshots};
use crate::design::{baseline_design, Design};
use crate::fem::{
    ContactConfig, FemModel, FullOrderSim, FullOrderState, MaterialParams, PressureCommand,
};
use crate::geometry::Part;

/// Mean over timesteps and nodes of the per-node Euclidean distance between
/// two sampled trajectories, in mm.
pub fn reduction_error(
    full: &[DVector<f64>],
    reduced: &[DVector<f64>],
) -> Result<f64, MorError> {
    if full.len() != reduced.len() || full.is_empty() {
        return Err(MorError::TrajectoryMismatch {
            full: full.len(),
            reduced: reduced.len(),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (qf, qr) in full.iter().zip(reduced.iter()) {
        if qf.len() != qr.len() {
            return Err(MorError::TrajectoryMismatch { full: qf.len(), reduced: qr.len() });
        }
        let nodes = qf.len() / 3;
        for n in 0..nodes {
            let dx = qf[3 * n] - qr[3 * n];
            let dy = qf[3 * n + 1] - qr[3 * n + 1];
            let dz = qf[3 * n + 2] - qr[3 * n + 2];
            total += (dx * dx + dy * dy + dz * dz).sqrt();
        }
        count += nodes;
    }
    Ok(total / count as f64)
}

/// Per-leg pressure schedule of a test animation.
#[derive(Debug, Clone, PartialEq)]
pub enum PressureSchedule {
    /// Visit all actuator extremes in Gray-code order.
    HypercubeWalk { dwell_s: f64, ramp_s: f64, low_kpa: f64, high_kpa: f64 },
    /// Offset sine per regulator with per-regulator phases (degrees).
    SineGait { amplitude_kpa: f64, offset_kpa: f64, period_s: f64, phases_deg: Vec<f64> },
    /// Two leg groups alternate between the extremes.
    AlternatingGroups { period_s: f64, ramp_s: f64, low_kpa: f64, high_kpa: f64 },
}

impl PressureSchedule {
    /// Per-leg pressures at time `t` for a robot with the given per-leg
    /// regulator assignment.
    pub fn pressures_at(&self, t: f64, leg_regulators: &[usize]) -> Vec<f64> {
        let n = leg_regulators.len();
        match self {
            PressureSchedule::HypercubeWalk { dwell_s, ramp_s, low_kpa, high_kpa } => {
                let vertices = gray_code_vertices(n);
                let idx = ((t / dwell_s) as usize).min(vertices.len() - 1);
                let frac = (t - idx as f64 * dwell_s) / dwell_s;
                let at = |v: u32, leg: usize| {
                    if v & (1 << leg) != 0 {
                        *high_kpa
                    } else {
                        *low_kpa
                    }
                };
                let blend = if *ramp_s <= 0.0 || idx == 0 {
                    1.0
                } else {
                    (frac * dwell_s / ramp_s).min(1.0)
                };
                (0..n)
                    .map(|leg| {
                        let prev = at(vertices[idx.saturating_sub(1)], leg);
                        let cur = at(vertices[idx], leg);
                        prev + (cur - prev) * blend
                    })
                    .collect()
            }
            PressureSchedule::SineGait { amplitude_kpa, offset_kpa, period_s, phases_deg } => {
                leg_regulators
                    .iter()
                    .map(|&reg| {
                        let phase = phases_deg.get(reg).copied().unwrap_or(0.0).to_radians();
                        (offset_kpa
                            + amplitude_kpa
                                * (std::f64::consts::TAU * t / period_s + phase).sin())
                        .clamp(0.0, 90.0)
                    })
                    .collect()
            }
            PressureSchedule::AlternatingGroups { period_s, ramp_s, low_kpa, high_kpa } => {
                // Group by leg parity; triangular ramp between extremes.
                let cycle = (t / period_s).fract();
                let ramp = (ramp_s / period_s).clamp(0.01, 0.49);
                let phase_a = alternating_wave(cycle, ramp);
                (0..n)
                    .map(|leg| {
                        let w = if leg % 2 == 0 { phase_a } else { 1.0 - phase_a };
                        low_kpa + (high_kpa - low_kpa) * w
                    })
                    .collect()
            }
        }
    }
}

/// Square wave with linear ramps: high for the first half-cycle.
fn alternating_wave(cycle: f64, ramp: f64) -> f64 {
    if cycle < ramp {
        cycle / ramp
    } else if cycle < 0.5 {
        1.0
    } else if cycle < 0.5 + ramp {
        1.0 - (cycle - 0.5) / ramp
    } else {
        0.0
    }
}

/// One test animation: a design plus a pressure schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TestAnimation {
    pub name: String,
    pub design: Design,
    pub schedule: PressureSchedule,
    pub duration_s: f64,
}

/// The four-animation validation suite at the given duration: a hypercube
/// walk and the expert gait on the baseline design, an alternating two-leg
/// design, and a six-leg design alternating in two groups of three.
pub fn test_animation_suite(duration_s: f64) -> Vec<TestAnimation> {
    let hypercube_dwell = duration_s / 16.0;
    vec![
        TestAnimation {
            name: "hamiltonian".into(),
            design: baseline_design(),
            schedule: PressureSchedule::HypercubeWalk {
                dwell_s: hypercube_dwell,
                ramp_s: 0.3 * hypercube_dwell,
                low_kpa: 0.0,
                high_kpa: 90.0,
            },
            duration_s,
        },
        TestAnimation {
            name: "baseline-gait".into(),
            design: baseline_design(),
            schedule: PressureSchedule::SineGait {
                amplitude_kpa: 45.0,
                offset_kpa: 45.0,
                period_s: 4.0,
                phases_deg: vec![0.0, 110.0, 0.0],
            },
            duration_s,
        },
        TestAnimation {
            name: "two-leg".into(),
            design: "1-2-----".parse().unwrap(),
            schedule: PressureSchedule::AlternatingGroups {
                period_s: 2.0,
                ramp_s: 0.4,
                low_kpa: 0.0,
                high_kpa: 90.0,
            },
            duration_s,
        },
        TestAnimation {
            name: "six-leg".into(),
            design: "112-233-".parse().unwrap(),
            schedule: PressureSchedule::AlternatingGroups {
                period_s: 2.0,
                ramp_s: 0.4,
                low_kpa: 0.0,
                high_kpa: 90.0,
            },
            duration_s,
        },
    ]
}

/// A recorded trajectory: node positions every `record_every` substeps.
pub struct Trajectory {
    pub samples: Vec<DVector<f64>>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct AnimationRunConfig {
    pub h: f64,
    pub record_every: usize,
}

impl Default for AnimationRunConfig {
    fn default() -> Self {
        AnimationRunConfig { h: 0.02, record_every: 5 }
    }
}

/// Runs an animation at full order.
pub fn run_animation_full(
    animation: &TestAnimation,
    disk: &Part,
    leg: &Part,
    material: &MaterialParams,
    contact: &ContactConfig,
    run: &AnimationRunConfig,
) -> Result<Trajectory, MorError> {
    let robot = crate::geometry::assemble_robot_mesh_any(&animation.design, disk, leg)
        .map_err(|e| MorError::Fem(e.to_string()))?;
    let leg_regs: Vec<usize> = robot.legs.iter().map(|l| l.regulator).collect();
    let model =
        FemModel::from_robot(&robot, material).map_err(|e| MorError::Fem(e.to_string()))?;
    let mut sim = FullOrderSim::new(model);
    let mut state = FullOrderState::rest(&sim.model);
    let steps = (animation.duration_s / run.h).round() as usize;
    let mut samples = Vec::new();
    let start = std::time::Instant::now();
    for i in 0..steps {
        let kpa = animation.schedule.pressures_at(i as f64 * run.h, &leg_regs);
        state = sim
            .step(&state, &PressureCommand::PerLeg(kpa), contact, run.h)
            .map_err(|e| MorError::Fem(e.to_string()))?;
        if (i + 1) % run.record_every == 0 {
            samples.push(state.q.clone());
        }
    }
    Ok(Trajectory { samples, wall_seconds: start.elapsed().as_secs_f64() })
}

/// Runs an animation on a reduced model built from the given part reduction.
pub fn run_animation_reduced(
    animation: &TestAnimation,
    disk: &Part,
    leg: &Part,
    leg_reduction: &PartReduction,
    material: &MaterialParams,
    contact: &ContactConfig,
    run: &AnimationRunConfig,
) -> Result<Trajectory, MorError> {
    let rmodel = build_reduced_design(&animation.design, disk, leg, leg_reduction, None)?;
    let leg_regs: Vec<usize> = rmodel.robot.legs.iter().map(|l| l.regulator).collect();
    let mut sim = ReducedSim::new(rmodel, material)?;
    let mut state = ReducedState::rest(sim.dim());
    let steps = (animation.duration_s / run.h).round() as usize;
    let mut samples = Vec::new();
    let start = std::time::Instant::now();
    for i in 0..steps {
        let kpa = animation.schedule.pressures_at(i as f64 * run.h, &leg_regs);
        state = sim.step(&state, &PressureCommand::PerLeg(kpa), contact, run.h)?;
        if (i + 1) % run.record_every == 0 {
            samples.push(sim.reconstruct(&state).q);
        }
    }
    Ok(Trajectory { samples, wall_seconds: start.elapsed().as_secs_f64() })
}

/// One row of the tolerance grid search.
#[derive(Debug, Clone)]
pub struct GridRow {
    pub mode_tol: f64,
    pub hr_tol: f64,
    pub modes: usize,
    pub rid_elements: usize,
    pub mean_error_mm: f64,
    pub reduced_wall_s: f64,
}

pub struct GridSearchResult {
    pub rows: Vec<GridRow>,
    /// Index of the selected row.
    pub selected: usize,
    pub full_wall_s: f64,
}

/// Grid search over the two reduction tolerances: for every pair, rebuild the
/// reduction from the same snapshots, run the animation suite reduced, and
/// report the mean error and wall time against the cached full-order runs.
/// Selection: fastest row with error within `error_budget_mm`, ties broken by
/// lower error; if none qualify, the lowest-error row.
#[allow(clippy::too_many_arguments)]
pub fn tolerance_grid_search(
    mode_tols: &[f64],
    hr_tols: &[f64],
    snapshots: &PartSnapshots,
    animations: &[TestAnimation],
    disk: &Part,
    leg: &Part,
    material: &MaterialParams,
    contact: &ContactConfig,
    run: &AnimationRunConfig,
    error_budget_mm: f64,
    max_training_snapshots: usize,
) -> Result<GridSearchResult, MorError> {
    if animations.is_empty() {
        return Err(MorError::NoSnapshots);
    }
    let leg_model =
        FemModel::from_part(leg, material).map_err(|e| MorError::Fem(e.to_string()))?;

    let mut full_runs = Vec::new();
    let mut full_wall_s = 0.0;
    for anim in animations {
        let traj = run_animation_full(anim, disk, leg, material, contact, run)?;
        full_wall_s += traj.wall_seconds;
        full_runs.push(traj);
    }

    let mut rows = Vec::new();
    for &mode_tol in mode_tols {
        let basis = pod_basis(&snapshots.leg, mode_tol)?;
        for &hr_tol in hr_tols {
            let rid = ecsw::ecsw_weights(
                &snapshots.leg,
                &basis,
                &leg_model,
                hr_tol,
                max_training_snapshots,
            )?;
            let reduction = PartReduction { basis: basis.clone(), rid };
            let mut err_sum = 0.0;
            let mut wall = 0.0;
            for (anim, full) in animations.iter().zip(full_runs.iter()) {
                let reduced = run_animation_reduced(
                    anim, disk, leg, &reduction, material, contact, run,
                )?;
                err_sum += reduction_error(&full.samples, &reduced.samples)?;
                wall += reduced.wall_seconds;
            }
            rows.push(GridRow {
                mode_tol,
                hr_tol,
                modes: reduction.basis.modes(),
                rid_elements: reduction.rid.elements.len(),
                mean_error_mm: err_sum / animations.len() as f64,
                reduced_wall_s: wall,
            });
        }
    }

    let selected = select_row(&rows, error_budget_mm);
    Ok(GridSearchResult { rows, selected, full_wall_s })
}

/// Fastest row within the error budget, ties broken by lower error; lowest
/// error overall if none qualify.
pub fn select_row(rows: &[GridRow], error_budget_mm: f64) -> usize {
    let feasible: Vec<usize> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.mean_error_mm <= error_budget_mm)
        .map(|(i, _)| i)
        .collect();
    if feasible.is_empty() {
        return rows
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.mean_error_mm.total_cmp(&b.1.mean_error_mm))
            .map(|(i, _)| i)
            .unwrap_or(0);
    }
    *feasible
        .iter()
        .min_by(|&&a, &&b| {
            rows[a]
                .reduced_wall_s
                .total_cmp(&rows[b].reduced_wall_s)
                .then(rows[a].mean_error_mm.total_cmp(&rows[b].mean_error_mm))
        })
        .unwrap()
}
