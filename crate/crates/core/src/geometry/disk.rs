//! The central disk: a voxelized cylinder with 8 attachment sectors on its rim.

use std::f64::consts::TAU;

use nalgebra::Point3;

use super::mesh::{FaceSet, Part, PartKind, Region};
use super::voxel::{select_surface_tris, Cell, VoxelGrid};
use super::GeometryError;
use crate::design::NUM_SLOTS;

#[derive(Debug, Clone, PartialEq)]
pub struct DiskSpec {
    pub radius_mm: f64,
    pub thickness_mm: f64,
    /// Grid refinement; the in-plane pitch is `radius_mm / (3 * resolution)`.
    pub resolution: u32,
    /// Height of the disk underside above the floor plane.
    pub z_offset_mm: f64,
}

impl Default for DiskSpec {
    fn default() -> Self {
        DiskSpec { radius_mm: 24.0, thickness_mm: 9.0, resolution: 1, z_offset_mm: 3.0 }
    }
}

/// Generates the disk part. A cell is solid iff its center lies within the
/// radius, which keeps the footprint symmetric under the grid's dihedral
/// symmetries so all 8 `slot<i>` rim-sector centroids land exactly on the
/// slot angles `2*pi*i/8`.
pub fn generate_disk_mesh(spec: &DiskSpec) -> Result<Part, GeometryError> {
    if spec.resolution < 1 {
        return Err(GeometryError::BadResolution);
    }
    if !(spec.radius_mm > 0.0) || !(spec.thickness_mm > 0.0) {
        return Err(GeometryError::DegenerateDimension(format!(
            "radius {} thickness {}",
            spec.radius_mm, spec.thickness_mm
        )));
    }
    let n_r = 3 * spec.resolution as usize;
    let pitch = spec.radius_mm / n_r as f64;
    let n_xy = 2 * n_r;
    let nz = ((spec.thickness_mm / pitch).round() as usize).max(1);
    let dz = spec.thickness_mm / nz as f64;

    let origin = Point3::new(-spec.radius_mm, -spec.radius_mm, spec.z_offset_mm);
    let mut grid = VoxelGrid::new(n_xy, n_xy, nz, [pitch, pitch, dz], origin);
    for k in 0..nz {
        for j in 0..n_xy {
            for i in 0..n_xy {
                let c = grid.cell_center(i, j, k);
                if c.x * c.x + c.y * c.y <= spec.radius_mm * spec.radius_mm {
                    grid.set(i, j, k, Cell::Solid(Region::Disk));
                }
            }
        }
    }
    let (mut mesh, regions, _) = grid.mesh();

    // Rim faces (lateral normals): everything that is not on the top or
    // bottom plane. Partition them into 8 sectors by centroid angle.
    let z_lo = spec.z_offset_mm;
    let z_hi = spec.z_offset_mm + spec.thickness_mm;
    let eps = 1e-9;
    let mut sector_tris: Vec<Vec<u32>> = vec![Vec::new(); NUM_SLOTS];
    for (si, tri) in mesh.surface_tris.iter().enumerate() {
        let pts: Vec<Point3<f64>> = tri.iter().map(|&v| mesh.nodes[v as usize]).collect();
        let on_bottom = pts.iter().all(|p| (p.z - z_lo).abs() < eps);
        let on_top = pts.iter().all(|p| (p.z - z_hi).abs() < eps);
        if on_bottom || on_top {
            continue;
        }
        let cx = (pts[0].x + pts[1].x + pts[2].x) / 3.0;
        let cy = (pts[0].y + pts[1].y + pts[2].y) / 3.0;
        let angle = cy.atan2(cx).rem_euclid(TAU);
        let sector =
            ((angle / (TAU / NUM_SLOTS as f64)).round() as usize) % NUM_SLOTS;
        sector_tris[sector].push(si as u32);
    }
    for (i, tris) in sector_tris.into_iter().enumerate() {
        mesh.face_sets.push(FaceSet { name: format!("slot{i}"), tris });
    }
    let floor = select_surface_tris(&mesh, |p| (p.z - z_lo).abs() < eps);
    mesh.face_sets.push(FaceSet { name: "floor_candidates".into(), tris: floor });

    Ok(Part { mesh, regions, cavities: Vec::new(), kind: PartKind::Disk })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::validate_mesh;
    use std::f64::consts::PI;

    #[test]
    fn default_disk_is_valid_with_eight_slots() {
        let part = generate_disk_mesh(&DiskSpec::default()).unwrap();
        assert!(validate_mesh(&part.mesh).is_empty());
        assert!(part.cavities.is_empty());
        for i in 0..NUM_SLOTS {
            assert!(
                !part.mesh.face_set_tris(&format!("slot{i}")).is_empty(),
                "slot{i} empty"
            );
        }
    }

    #[test]
    fn slot_centroids_sit_on_slot_angles() {
        let spec = DiskSpec::default();
        let part = generate_disk_mesh(&spec).unwrap();
        let pitch = spec.radius_mm / (3.0 * spec.resolution as f64);
        for i in 0..NUM_SLOTS {
            let c = part.mesh.face_set_centroid(&format!("slot{i}")).unwrap();
            let angle = c.y.atan2(c.x).rem_euclid(std::f64::consts::TAU);
            let target = std::f64::consts::TAU * i as f64 / NUM_SLOTS as f64;
            let mut diff = (angle - target).abs();
            if diff > PI {
                diff = std::f64::consts::TAU - diff;
            }
            assert!(diff < 1e-6, "slot{i} centroid angle {angle} vs {target}");
            let radius = (c.x * c.x + c.y * c.y).sqrt();
            assert!(
                (radius - spec.radius_mm).abs() <= pitch,
                "slot{i} centroid radius {radius}"
            );
        }
    }

    #[test]
    fn volume_close_to_cylinder_at_resolution_two() {
        let spec = DiskSpec { resolution: 2, ..DiskSpec::default() };
        let part = generate_disk_mesh(&spec).unwrap();
        let exact = PI * spec.radius_mm * spec.radius_mm * spec.thickness_mm;
        let got = part.mesh.volume();
        assert!(
            (got - exact).abs() / exact < 0.05,
            "voxel volume {got} vs cylinder {exact}"
        );
    }
}
