//! Assembly of a robot mesh from a design: one leg instance per occupied slot,
//! rigidly placed at the slot frame and tied to the disk rim.

use nalgebra::{Matrix3, Point3, Vector3};

use super::mesh::{FaceSet, Mesh, Part, Region};
use super::GeometryError;
use crate::design::{validate_design, Design};

/// Rigid placement of a part instance: `p_world = R * p_canonical + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementFrame {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl PlacementFrame {
    pub fn identity() -> Self {
        PlacementFrame { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Frame of slot `i`: radially outward at angle `2*pi*i/8` about the disk
    /// axis, with the attachment plane at `attach_radius`. Uses exact
    /// cos/sin values for the 45-degree multiples.
    pub fn slot(i: usize, attach_radius: f64) -> Self {
        let (c, s) = exact_cos_sin_eighth(i);
        let rotation = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        let translation = rotation * Vector3::new(attach_radius, 0.0, 0.0);
        PlacementFrame { rotation, translation }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Inverse map into the canonical frame.
    pub fn unapply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (p.coords - self.translation))
    }
}

/// Exact (cos, sin) of `i * 45°`.
fn exact_cos_sin_eighth(i: usize) -> (f64, f64) {
    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;
    match i % 8 {
        0 => (1.0, 0.0),
        1 => (H, H),
        2 => (0.0, 1.0),
        3 => (-H, H),
        4 => (-1.0, 0.0),
        5 => (-H, -H),
        6 => (0.0, -1.0),
        7 => (H, -H),
        _ => unreachable!(),
    }
}

/// One placed leg in a robot mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct LegInstance {
    pub slot: usize,
    /// 0-based regulator index.
    pub regulator: usize,
    pub frame: PlacementFrame,
    /// Node range of this instance within the merged mesh.
    pub node_range: std::ops::Range<usize>,
    /// Cavity face-set names within the merged mesh, in canonical order.
    pub cavity_sets: Vec<String>,
}

/// A design's merged mesh: the disk plus one placed leg per occupied slot.
/// Leg attachment nodes are tied to nearby disk rim nodes; the tie pairs keep
/// their rest offsets, so assembly itself is exactly rigid.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotMesh {
    pub design: Design,
    pub mesh: Mesh,
    /// Material region per tet.
    pub regions: Vec<Region>,
    pub disk_range: std::ops::Range<usize>,
    pub legs: Vec<LegInstance>,
    /// (leg node, disk node) pairs coupled by stiff springs at their rest offset.
    pub ties: Vec<(u32, u32)>,
    /// Nodes eligible for floor contact.
    pub contact_candidates: Vec<u32>,
    /// Canonical parts the instances were stamped from.
    pub leg_part: Part,
    pub disk_part: Part,
}

impl RobotMesh {
    /// Index of the disk node closest to the disk centroid, used as the
    /// reported "disk center" for rewards and trajectory dumps.
    pub fn disk_center_node(&self) -> u32 {
        let nodes = &self.mesh.nodes[self.disk_range.clone()];
        let mut acc = Vector3::zeros();
        for p in nodes {
            acc += p.coords;
        }
        let centroid = acc / nodes.len() as f64;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, p) in nodes.iter().enumerate() {
            let d = (p.coords - centroid).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        (self.disk_range.start + best) as u32
    }
}

/// Assembles a robot mesh for a valid design (3-6 legs).
pub fn assemble_robot_mesh(
    design: &Design,
    disk: &Part,
    leg: &Part,
) -> Result<RobotMesh, GeometryError> {
    if !validate_design(design) {
        return Err(GeometryError::InvalidDesign(format!(
            "{design} has {} legs, need 3..=6",
            design.leg_count()
        )));
    }
    assemble_robot_mesh_any(design, disk, leg)
}

/// Assembly without the leg-count rule; used by the reduction test-animation
/// suite, which includes designs outside the search space (e.g. two legs).
pub fn assemble_robot_mesh_any(
    design: &Design,
    disk: &Part,
    leg: &Part,
) -> Result<RobotMesh, GeometryError> {
    if design.leg_count() == 0 {
        return Err(GeometryError::InvalidDesign("design has no legs".into()));
    }
    let attach_radius = disk_radius(disk);

    let mut mesh = Mesh::default();
    let mut regions = Vec::new();

    // Disk first.
    mesh.nodes.extend_from_slice(&disk.mesh.nodes);
    mesh.tets.extend_from_slice(&disk.mesh.tets);
    mesh.surface_tris.extend_from_slice(&disk.mesh.surface_tris);
    for fs in &disk.mesh.face_sets {
        mesh.face_sets
            .push(FaceSet { name: format!("disk/{}", fs.name), tris: fs.tris.clone() });
    }
    regions.extend_from_slice(&disk.regions);
    let disk_range = 0..disk.mesh.nodes.len();

    let mut legs = Vec::new();
    let mut ties = Vec::new();

    for (leg_idx, slot) in design.occupied_slots().into_iter().enumerate() {
        let regulator = design.leg_regulators()[leg_idx];
        let frame = PlacementFrame::slot(slot, attach_radius);

        let node_off = mesh.nodes.len();
        let tri_off = mesh.surface_tris.len() as u32;
        mesh.nodes.extend(leg.mesh.nodes.iter().map(|p| frame.apply(p)));
        mesh.tets.extend(
            leg.mesh
                .tets
                .iter()
                .map(|t| t.map(|v| v + node_off as u32)),
        );
        mesh.surface_tris.extend(
            leg.mesh
                .surface_tris
                .iter()
                .map(|t| t.map(|v| v + node_off as u32)),
        );
        let mut cavity_sets = Vec::new();
        for fs in &leg.mesh.face_sets {
            let name = format!("leg{leg_idx}/{}", fs.name);
            if leg.cavities.contains(&fs.name) {
                cavity_sets.push(name.clone());
            }
            mesh.face_sets.push(FaceSet {
                name,
                tris: fs.tris.iter().map(|t| t + tri_off).collect(),
            });
        }
        regions.extend_from_slice(&leg.regions);

        // Tie every attachment-face node to the nearest node of the disk's
        // matching rim sector.
        let sector_nodes = disk.mesh.face_set_nodes(&format!("slot{slot}"));
        for v in leg.mesh.face_set_nodes("attachment") {
            let p = mesh.nodes[node_off + v as usize];
            let mut best = sector_nodes[0];
            let mut best_d = f64::INFINITY;
            for &dn in &sector_nodes {
                let d = (disk.mesh.nodes[dn as usize] - p).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = dn;
                }
            }
            ties.push(((node_off + v as usize) as u32, best));
        }

        legs.push(LegInstance {
            slot,
            regulator,
            frame,
            node_range: node_off..mesh.nodes.len(),
            cavity_sets,
        });
    }

    let mut contact_candidates = Vec::new();
    contact_candidates.extend(disk.mesh.face_set_nodes("floor_candidates"));
    for inst in &legs {
        let off = inst.node_range.start as u32;
        contact_candidates
            .extend(leg.mesh.face_set_nodes("floor_candidates").iter().map(|v| v + off));
    }
    contact_candidates.sort_unstable();
    contact_candidates.dedup();

    Ok(RobotMesh {
        design: *design,
        mesh,
        regions,
        disk_range,
        legs,
        ties,
        contact_candidates,
        leg_part: leg.clone(),
        disk_part: disk.clone(),
    })
}

fn disk_radius(disk: &Part) -> f64 {
    disk.mesh
        .nodes
        .iter()
        .map(|p| (p.x * p.x + p.y * p.y).sqrt())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::baseline_design;
    use crate::geometry::disk::{generate_disk_mesh, DiskSpec};
    use crate::geometry::mesh::validate_mesh;
    use crate::geometry::pneunet::{generate_pneunet_mesh, PneunetSpec};

    fn parts() -> (Part, Part) {
        (
            generate_disk_mesh(&DiskSpec::default()).unwrap(),
            generate_pneunet_mesh(&PneunetSpec::default()).unwrap(),
        )
    }

    #[test]
    fn baseline_assembly_bookkeeping() {
        let (disk, leg) = parts();
        let robot = assemble_robot_mesh(&baseline_design(), &disk, &leg).unwrap();
        assert_eq!(robot.legs.len(), 4);
        assert_eq!(
            robot.mesh.num_nodes(),
            disk.mesh.num_nodes() + 4 * leg.mesh.num_nodes()
        );
        assert!(validate_mesh(&robot.mesh).is_empty());
        assert_eq!(robot.regions.len(), robot.mesh.tets.len());
        // Part node ranges are disjoint and cover all nodes.
        let mut covered = robot.disk_range.len();
        for inst in &robot.legs {
            covered += inst.node_range.len();
        }
        assert_eq!(covered, robot.mesh.num_nodes());
        assert!(!robot.ties.is_empty());
        // Regulators recorded per leg: slots 0,1 -> reg 0; slots 4,5 -> reg 1.
        let regs: Vec<usize> = robot.legs.iter().map(|l| l.regulator).collect();
        assert_eq!(regs, vec![0, 0, 1, 1]);
    }

    #[test]
    fn invalid_design_rejected() {
        let (disk, leg) = parts();
        let two: Design = "12------".parse().unwrap();
        assert!(assemble_robot_mesh(&two, &disk, &leg).is_err());
        assert!(assemble_robot_mesh_any(&two, &disk, &leg).is_ok());
    }

    #[test]
    fn slot_rotation_relates_leg_instances() {
        let (disk, leg) = parts();
        let d: Design = "1-1-1---".parse().unwrap(); // slots 0, 2, 4
        let robot = assemble_robot_mesh(&d, &disk, &leg).unwrap();
        let rot90 = PlacementFrame::slot(2, 0.0).rotation;
        let leg0 = &robot.legs[0];
        let leg1 = &robot.legs[1];
        for k in 0..leg.mesh.num_nodes() {
            let p0 = robot.mesh.nodes[leg0.node_range.start + k];
            let p1 = robot.mesh.nodes[leg1.node_range.start + k];
            let mapped = rot90 * p0.coords;
            assert!((mapped - p1.coords).norm() < 1e-9, "node {k}");
        }
    }

    #[test]
    fn placement_is_rigid() {
        let (disk, leg) = parts();
        let robot = assemble_robot_mesh(&baseline_design(), &disk, &leg).unwrap();
        let inst = &robot.legs[1];
        // Pairwise distances of a sample of node pairs are preserved.
        let n = leg.mesh.num_nodes();
        for (a, b) in [(0, n - 1), (1, n / 2), (n / 3, 2 * n / 3)] {
            let canon = (leg.mesh.nodes[a] - leg.mesh.nodes[b]).norm();
            let placed = (robot.mesh.nodes[inst.node_range.start + a]
                - robot.mesh.nodes[inst.node_range.start + b])
                .norm();
            assert!((canon - placed).abs() < 1e-9);
        }
    }

    #[test]
    fn assembly_is_deterministic() {
        let (disk, leg) = parts();
        let a = assemble_robot_mesh(&baseline_design(), &disk, &leg).unwrap();
        let b = assemble_robot_mesh(&baseline_design(), &disk, &leg).unwrap();
        assert_eq!(a, b);
    }
}
