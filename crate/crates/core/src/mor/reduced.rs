//! Per-part reductions composed into design-specific reduced models: leg
//! bases rotated into slot frames (Eq.-style rigid rotation of basis node
//! blocks), block-diagonal structure over part instances, reduced integration
//! domains merged with instance offsets.

use nalgebra::DMatrix;

use super::ecsw::ReducedIntegrationDomain;
use super::pod::ReducedBasis;
use super::MorError;
use crate::design::Design;
use crate::geometry::{assemble_robot_mesh_any, Part, PlacementFrame, RobotMesh};

/// The reduction artifacts of one part kind.
#[derive(Debug, Clone, PartialEq)]
pub struct PartReduction {
    pub basis: ReducedBasis,
    pub rid: ReducedIntegrationDomain,
}

/// Rotates each 3-vector node block of every basis column by the frame
/// rotation. Translation is irrelevant for displacement bases.
pub fn rotate_basis(basis: &ReducedBasis, frame: &PlacementFrame) -> ReducedBasis {
    let dof = basis.phi.nrows();
    assert_eq!(dof % 3, 0, "basis rows must be node blocks");
    let r = frame.rotation;
    let mut phi = DMatrix::zeros(dof, basis.phi.ncols());
    for col in 0..basis.phi.ncols() {
        for node in 0..dof / 3 {
            let v = nalgebra::Vector3::new(
                basis.phi[(3 * node, col)],
                basis.phi[(3 * node + 1, col)],
                basis.phi[(3 * node + 2, col)],
            );
            let w = r * v;
            phi[(3 * node, col)] = w.x;
            phi[(3 * node + 1, col)] = w.y;
            phi[(3 * node + 2, col)] = w.z;
        }
    }
    ReducedBasis {
        phi,
        mode_tol: basis.mode_tol,
        energy_fraction: basis.energy_fraction,
        singular_values: basis.singular_values.clone(),
    }
}

/// Basis of one part-instance block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockBasis {
    /// POD basis (`3*nodes x m`), already rotated into the instance frame.
    Reduced(DMatrix<f64>),
    /// Full-order block (the disk by default).
    Identity,
}

impl BlockBasis {
    pub fn modes(&self, dof: usize) -> usize {
        match self {
            BlockBasis::Reduced(phi) => phi.ncols(),
            BlockBasis::Identity => dof,
        }
    }
}

/// One part instance in the reduced coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBlock {
    /// Node range within the robot mesh.
    pub node_range: std::ops::Range<usize>,
    /// Coordinate range within the reduced state.
    pub coord_range: std::ops::Range<usize>,
    pub basis: BlockBasis,
}

/// A design-specific reduced model: block-diagonal bases over part instances
/// plus the merged integration domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub robot: RobotMesh,
    /// Block 0 is the disk; legs follow in instance order.
    pub blocks: Vec<ReducedBlock>,
    /// Elements to integrate, as (robot element index, weight). Leg RIDs are
    /// remapped with instance offsets; full-order blocks integrate every
    /// element at weight one.
    pub integration: Vec<(u32, f64)>,
    /// Total reduced dimension.
    pub dim: usize,
}

impl ReducedModel {
    /// Reconstructs full positions `q = q0 + blockdiag(phi) alpha`.
    pub fn reconstruct_q(&self, alpha: &nalgebra::DVector<f64>, out: &mut [f64]) {
        for (i, p) in self.robot.mesh.nodes.iter().enumerate() {
            out[3 * i] = p.x;
            out[3 * i + 1] = p.y;
            out[3 * i + 2] = p.z;
        }
        self.accumulate_displacement(alpha, out);
    }

    /// Reconstructs velocities (or adds displacement) `out += blockdiag(phi) a`.
    pub fn accumulate_displacement(&self, a: &nalgebra::DVector<f64>, out: &mut [f64]) {
        for block in &self.blocks {
            let rows = 3 * block.node_range.start;
            match &block.basis {
                BlockBasis::Identity => {
                    for (k, ci) in block.coord_range.clone().enumerate() {
                        out[rows + k] += a[ci];
                    }
                }
                BlockBasis::Reduced(phi) => {
                    for r in 0..phi.nrows() {
                        let mut acc = 0.0;
                        for (c, ci) in block.coord_range.clone().enumerate() {
                            acc += phi[(r, c)] * a[ci];
                        }
                        out[rows + r] += acc;
                    }
                }
            }
        }
    }

    /// Projects a full-space vector into reduced coordinates,
    /// `out += blockdiag(phi)^T f`.
    pub fn project(&self, f: &[f64], out: &mut nalgebra::DVector<f64>) {
        for block in &self.blocks {
            let rows = 3 * block.node_range.start;
            match &block.basis {
                BlockBasis::Identity => {
                    for (k, ci) in block.coord_range.clone().enumerate() {
                        out[ci] += f[rows + k];
                    }
                }
                BlockBasis::Reduced(phi) => {
                    for (c, ci) in block.coord_range.clone().enumerate() {
                        let mut acc = 0.0;
                        for r in 0..phi.nrows() {
                            acc += phi[(r, c)] * f[rows + r];
                        }
                        out[ci] += acc;
                    }
                }
            }
        }
    }

    /// The block containing a node, with the node's local offset.
    pub fn block_of_node(&self, node: u32) -> (usize, usize) {
        for (bi, block) in self.blocks.iter().enumerate() {
            if block.node_range.contains(&(node as usize)) {
                return (bi, node as usize - block.node_range.start);
            }
        }
        unreachable!("node {node} outside all blocks")
    }
}

/// Composes a reduced model for a design from per-part reductions. The leg
/// basis is rotated into each occupied slot's frame; the disk stays
/// full-order unless a disk reduction is supplied.
pub fn build_reduced_design(
    design: &Design,
    disk: &Part,
    leg: &Part,
    leg_reduction: &PartReduction,
    disk_reduction: Option<&PartReduction>,
) -> Result<ReducedModel, MorError> {
    if leg_reduction.basis.phi.nrows() != leg.mesh.dof() {
        return Err(MorError::BasisMismatch {
            expected: leg.mesh.dof(),
            found: leg_reduction.basis.phi.nrows(),
        });
    }
    let robot = assemble_robot_mesh_any(design, disk, leg)
        .map_err(|e| MorError::Fem(e.to_string()))?;

    let mut blocks = Vec::new();
    let mut integration = Vec::new();
    let mut dim = 0usize;

    let disk_ntets = disk.mesh.tets.len() as u32;
    let leg_ntets = leg.mesh.tets.len() as u32;

    match disk_reduction {
        None => {
            let d0 = disk.mesh.dof();
            blocks.push(ReducedBlock {
                node_range: robot.disk_range.clone(),
                coord_range: dim..dim + d0,
                basis: BlockBasis::Identity,
            });
            dim += d0;
            for e in 0..disk_ntets {
                integration.push((e, 1.0));
            }
        }
        Some(red) => {
            if red.basis.phi.nrows() != disk.mesh.dof() {
                return Err(MorError::BasisMismatch {
                    expected: disk.mesh.dof(),
                    found: red.basis.phi.nrows(),
                });
            }
            let m = red.basis.modes();
            blocks.push(ReducedBlock {
                node_range: robot.disk_range.clone(),
                coord_range: dim..dim + m,
                basis: BlockBasis::Reduced(red.basis.phi.clone()),
            });
            dim += m;
            for (e, w) in red.rid.elements.iter().zip(red.rid.weights.iter()) {
                integration.push((*e, *w));
            }
        }
    }

    for (leg_idx, inst) in robot.legs.iter().enumerate() {
        let rotated = rotate_basis(&leg_reduction.basis, &inst.frame);
        let m = rotated.modes();
        blocks.push(ReducedBlock {
            node_range: inst.node_range.clone(),
            coord_range: dim..dim + m,
            basis: BlockBasis::Reduced(rotated.phi),
        });
        dim += m;
        let offset = disk_ntets + leg_idx as u32 * leg_ntets;
        for (e, w) in
            leg_reduction.rid.elements.iter().zip(leg_reduction.rid.weights.iter())
        {
            integration.push((offset + e, *w));
        }
    }

    Ok(ReducedModel { robot, blocks, integration, dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::baseline_design;
    use crate::geometry::{generate_disk_mesh, generate_pneunet_mesh, DiskSpec, PneunetSpec};
    use crate::mor::ecsw::ReducedIntegrationDomain;
    use crate::mor::pod::ReducedBasis;
    use nalgebra::DVector;

    fn translation_basis(dof: usize) -> ReducedBasis {
        let n = dof / 3;
        let mut phi = DMatrix::zeros(dof, 3);
        for node in 0..n {
            for axis in 0..3 {
                phi[(3 * node + axis, axis)] = 1.0 / (n as f64).sqrt();
            }
        }
        ReducedBasis { phi, mode_tol: 0.1, energy_fraction: 1.0, singular_values: vec![] }
    }

    #[test]
    fn identity_rotation_is_bitwise_noop() {
        let basis = translation_basis(12);
        let rotated = rotate_basis(&basis, &PlacementFrame::identity());
        assert_eq!(basis.phi, rotated.phi);
    }

    #[test]
    fn quarter_turn_maps_x_translation_to_y() {
        let basis = translation_basis(12);
        let frame = PlacementFrame::slot(2, 0.0); // 90 degrees
        let rotated = rotate_basis(&basis, &frame);
        let x_col = basis.phi.column(0);
        let y_col = basis.phi.column(1);
        // R * e_x = e_y, so the rotated x-translation column is the
        // y-translation column.
        assert!((rotated.phi.column(0) - y_col).norm() < 1e-12);
        assert!((rotated.phi.column(1) + x_col).norm() < 1e-12);
        // Norms preserved.
        for c in 0..3 {
            assert!((rotated.phi.column(c).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn block_structure_and_dimension() {
        let disk = generate_disk_mesh(&DiskSpec::default()).unwrap();
        let leg = generate_pneunet_mesh(&PneunetSpec::default()).unwrap();
        let basis = translation_basis(leg.mesh.dof());
        let reduction = PartReduction {
            basis,
            rid: ReducedIntegrationDomain {
                elements: vec![0, 5, 9],
                weights: vec![2.0, 1.5, 3.0],
                training_residual: 0.0,
                residual_target: 0.0,
                hr_tol: 0.001,
            },
        };
        let design = baseline_design();
        let rm = build_reduced_design(&design, &disk, &leg, &reduction, None).unwrap();
        assert_eq!(rm.dim, disk.mesh.dof() + 4 * 3);
        assert_eq!(rm.blocks.len(), 5);
        // Disk integrates fully; each leg contributes its RID with offsets.
        let disk_ntets = disk.mesh.tets.len();
        assert_eq!(rm.integration.len(), disk_ntets + 4 * 3);
        // Deterministic construction.
        let rm2 = build_reduced_design(&design, &disk, &leg, &reduction, None).unwrap();
        assert_eq!(rm, rm2);
    }

    #[test]
    fn opposite_slots_differ_by_half_turn() {
        let disk = generate_disk_mesh(&DiskSpec::default()).unwrap();
        let leg = generate_pneunet_mesh(&PneunetSpec::default()).unwrap();
        let basis = translation_basis(leg.mesh.dof());
        let reduction = PartReduction {
            basis: basis.clone(),
            rid: ReducedIntegrationDomain::full(leg.mesh.tets.len()),
        };
        // Slots 0 and 4 are opposite.
        let design: Design = "1---1---".parse().unwrap();
        let rm = build_reduced_design(&design, &disk, &leg, &reduction, None).unwrap();
        let (a, b) = (&rm.blocks[1], &rm.blocks[2]);
        let (BlockBasis::Reduced(pa), BlockBasis::Reduced(pb)) = (&a.basis, &b.basis) else {
            panic!("legs must be reduced blocks");
        };
        // The 180-degree rotation negates x and y node components.
        for col in 0..3 {
            for node in 0..leg.mesh.num_nodes() {
                assert!((pa[(3 * node, col)] + pb[(3 * node, col)]).abs() < 1e-12);
                assert!((pa[(3 * node + 1, col)] + pb[(3 * node + 1, col)]).abs() < 1e-12);
                assert!((pa[(3 * node + 2, col)] - pb[(3 * node + 2, col)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reconstruction_project_roundtrip() {
        let disk = generate_disk_mesh(&DiskSpec::default()).unwrap();
        let leg = generate_pneunet_mesh(&PneunetSpec::default()).unwrap();
        let basis = translation_basis(leg.mesh.dof());
        let reduction = PartReduction {
            basis,
            rid: ReducedIntegrationDomain::full(leg.mesh.tets.len()),
        };
        let design: Design = "12-3----".parse().unwrap();
        let rm = build_reduced_design(&design, &disk, &leg, &reduction, None).unwrap();
        let alpha = DVector::from_fn(rm.dim, |i, _| ((i * 7 % 13) as f64 - 6.0) * 0.01);
        let mut disp = vec![0.0; rm.robot.mesh.dof()];
        rm.accumulate_displacement(&alpha, &mut disp);
        let mut back = DVector::zeros(rm.dim);
        rm.project(&disp, &mut back);
        // Orthonormal blocks: project(reconstruct(alpha)) = alpha.
        assert!((back - alpha).norm() < 1e-10);
    }
}
