//! Snapshot collection: animate designs through the pressure extremes of
//! their actuators and record per-part displacement snapshots in the part's
//! canonical frame.

use nalgebra::DVector;
use rand::seq::IndexedRandom;
use rand::SeedableRng;

use super::pod::{SnapshotMeta, SnapshotSet};
use super::MorError;
use crate::design::{Design, DesignSpace};
use crate::fem::{
    ContactConfig, FemModel, FullOrderSim, FullOrderState, MaterialParams, PressureCommand,
};
use crate::geometry::{assemble_robot_mesh_any, Part, RobotMesh};

/// Protocol parameters for snapshot animations.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotConfig {
    /// Hold time per hypercube vertex, seconds.
    pub dwell_s: f64,
    /// Pressure ramp duration at each vertex transition, seconds.
    pub ramp_s: f64,
    /// Substep size, seconds.
    pub h: f64,
    /// Record a snapshot every `interval` substeps.
    pub interval: usize,
    /// Low/high actuator extremes, kPa.
    pub pressure_low_kpa: f64,
    pub pressure_high_kpa: f64,
    /// Keep at most this many columns per part (uniform thinning).
    pub max_columns: usize,
    /// Collect disk snapshots too (the disk is normally kept full-order).
    pub include_disk: bool,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        SnapshotConfig {
            dwell_s: 0.5,
            ramp_s: 0.2,
            h: 0.02,
            interval: 5,
            pressure_low_kpa: 0.0,
            pressure_high_kpa: 90.0,
            max_columns: 600,
            include_disk: false,
        }
    }
}

/// Snapshot sets per part kind.
#[derive(Debug, Clone, Default)]
pub struct PartSnapshots {
    pub leg: SnapshotSet,
    pub disk: SnapshotSet,
}

/// The default heuristic snapshot design list: `count` designs sampled
/// uniformly per leg count in 3..=6, deterministically from `seed`.
pub fn default_snapshot_designs(space: &DesignSpace, count: usize, seed: u64) -> Vec<Design> {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(crate::util::rng::derive_seed(
        seed,
        "snapshot-designs",
        0,
    ));
    let all = space.enumerate(true);
    let mut by_legs: Vec<Vec<Design>> = vec![Vec::new(); space.max_legs + 1];
    for d in all {
        by_legs[d.leg_count()].push(d);
    }
    let mut out = Vec::new();
    let mut legs = space.min_legs;
    while out.len() < count {
        if let Some(d) = by_legs[legs].choose(&mut rng) {
            out.push(*d);
        }
        legs += 1;
        if legs > space.max_legs {
            legs = space.min_legs;
        }
    }
    out
}

/// Gray-code order of the `2^n` hypercube vertices.
pub fn gray_code_vertices(n: usize) -> Vec<u32> {
    (0..(1u32 << n)).map(|i| i ^ (i >> 1)).collect()
}

/// Collects per-part snapshots over the given designs. Each design's
/// animation walks the pressure extremes of its actuators in Gray-code order
/// (one actuator switches per vertex), holding each vertex for the dwell
/// time. Designs whose simulation fails are skipped and recorded.
pub fn collect_snapshots(
    designs: &[Design],
    disk: &Part,
    leg: &Part,
    material: &MaterialParams,
    contact: &ContactConfig,
    config: &SnapshotConfig,
) -> Result<PartSnapshots, MorError> {
    if designs.is_empty() {
        return Err(MorError::NoSnapshots);
    }
    if config.interval == 0 {
        return Err(MorError::BadTolerance(0.0));
    }
    let mut out = PartSnapshots {
        leg: SnapshotSet::new(leg.mesh.dof()),
        disk: SnapshotSet::new(disk.mesh.dof()),
    };

    for design in designs {
        let robot = assemble_robot_mesh_any(design, disk, leg)
            .map_err(|e| MorError::Fem(e.to_string()))?;
        match animate_design(&robot, material, contact, config, &mut out) {
            Ok(()) => {}
            Err(err) => {
                let tag = format!("{design}: {err}");
                out.leg.skipped_designs.push(tag.clone());
                out.disk.skipped_designs.push(tag);
            }
        }
    }
    out.leg.thin(config.max_columns);
    if config.include_disk {
        out.disk.thin(config.max_columns);
    }
    if out.leg.is_empty() {
        return Err(MorError::NoSnapshots);
    }
    Ok(out)
}

fn animate_design(
    robot: &RobotMesh,
    material: &MaterialParams,
    contact: &ContactConfig,
    config: &SnapshotConfig,
    out: &mut PartSnapshots,
) -> Result<(), MorError> {
    let model = FemModel::from_robot(robot, material).map_err(|e| MorError::Fem(e.to_string()))?;
    let mut sim = FullOrderSim::new(model);
    let mut state = FullOrderState::rest(&sim.model);

    let n_legs = robot.legs.len();
    let vertices = gray_code_vertices(n_legs);
    let steps_per_vertex = (config.dwell_s / config.h).round().max(1.0) as usize;
    let ramp_steps = (config.ramp_s / config.h).round() as usize;

    let vertex_pressures = |v: u32| -> Vec<f64> {
        (0..n_legs)
            .map(|i| {
                if v & (1 << i) != 0 {
                    config.pressure_high_kpa
                } else {
                    config.pressure_low_kpa
                }
            })
            .collect()
    };

    let mut step_count = 0u32;
    let mut previous = vertex_pressures(vertices[0]);
    for (vi, &vertex) in vertices.iter().enumerate() {
        let target = vertex_pressures(vertex);
        for s in 0..steps_per_vertex {
            let blend = if ramp_steps == 0 || vi == 0 {
                1.0
            } else {
                ((s + 1) as f64 / ramp_steps as f64).min(1.0)
            };
            let kpa: Vec<f64> = previous
                .iter()
                .zip(target.iter())
                .map(|(p, t)| p + (t - p) * blend)
                .collect();
            state = sim
                .step(&state, &PressureCommand::PerLeg(kpa), contact, config.h)
                .map_err(|e| MorError::Fem(e.to_string()))?;
            step_count += 1;
            if step_count as usize % config.interval == 0 {
                record_snapshots(robot, &state, vi as u32, step_count, config, out);
            }
        }
        previous = target;
    }
    Ok(())
}

fn record_snapshots(
    robot: &RobotMesh,
    state: &FullOrderState,
    vertex: u32,
    step: u32,
    config: &SnapshotConfig,
    out: &mut PartSnapshots,
) {
    let design = robot.design.to_string();
    for inst in &robot.legs {
        let dof = inst.node_range.len() * 3;
        let mut u = DVector::zeros(dof);
        let rot_t = inst.frame.rotation.transpose();
        for (k, node) in inst.node_range.clone().enumerate() {
            let rest = robot.mesh.nodes[node];
            let now = state.node(node as u32);
            let local = rot_t * (now - rest);
            u[3 * k] = local.x;
            u[3 * k + 1] = local.y;
            u[3 * k + 2] = local.z;
        }
        out.leg.push(u, SnapshotMeta { design: design.clone(), vertex, step });
    }
    if config.include_disk {
        let dof = robot.disk_range.len() * 3;
        let mut u = DVector::zeros(dof);
        for (k, node) in robot.disk_range.clone().enumerate() {
            let rest = robot.mesh.nodes[node];
            let now = state.node(node as u32);
            let d = now - rest;
            u[3 * k] = d.x;
            u[3 * k + 1] = d.y;
            u[3 * k + 2] = d.z;
        }
        out.disk.push(u, SnapshotMeta { design: design.clone(), vertex, step });
    }
}
