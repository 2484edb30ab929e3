//! Procedural PneuNet leg: a silicone block with internal pressurized chambers
//! over a stiffer bottom constraint layer.
//!
//! The canonical frame puts the attachment (proximal) face at `x = 0`, the
//! leg extending toward `+x`, centered on `y = 0`, resting on `z = 0`. Both
//! end segments are solid; the proximal one carries the `attachment` face set.
//! Chambers are connected by a low channel above the constraint layer, so by
//! default they share a single cavity.

use nalgebra::Point3;

use super::mesh::{Part, PartKind, Region};
use super::voxel::{select_surface_tris, Cell, VoxelGrid};
use super::GeometryError;

/// Dimensions of the procedural PneuNet, mm. Feature sizes are snapped to the
/// voxel pitch `wall_mm / resolution`, so the defaults mesh exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PneunetSpec {
    pub chambers: usize,
    /// Chamber extent along the leg axis.
    pub chamber_len_mm: f64,
    /// Interior wall, top wall, and side wall thickness.
    pub wall_mm: f64,
    pub width_mm: f64,
    pub height_mm: f64,
    /// Bottom constraint-layer thickness.
    pub bottom_mm: f64,
    /// Solid end segments (the proximal one is the attachment region).
    pub end_mm: f64,
    /// Chamber-connecting channel height; 0 disables the shared cavity.
    pub channel_mm: f64,
    /// Grid refinement; cell pitch is `wall_mm / resolution`.
    pub resolution: u32,
}

impl Default for PneunetSpec {
    fn default() -> Self {
        PneunetSpec {
            chambers: 4,
            chamber_len_mm: 8.0,
            wall_mm: 2.0,
            width_mm: 16.0,
            height_mm: 16.0,
            bottom_mm: 2.0,
            end_mm: 4.0,
            channel_mm: 2.0,
            resolution: 1,
        }
    }
}

impl PneunetSpec {
    /// Total leg length along the canonical axis, after grid snapping.
    pub fn length_mm(&self) -> f64 {
        let pitch = self.pitch();
        let cells = |d: f64| (d / pitch).round().max(1.0);
        pitch
            * (2.0 * cells(self.end_mm)
                + self.chambers as f64 * cells(self.chamber_len_mm)
                + (self.chambers as f64 - 1.0) * cells(self.wall_mm))
    }

    fn pitch(&self) -> f64 {
        self.wall_mm / self.resolution as f64
    }
}

/// Generates the PneuNet part. One cavity face set per chamber group (a single
/// shared cavity with the default connecting channel), a `constraint` bottom
/// element region, the proximal face tagged `attachment`, and bottom plus
/// distal-end faces tagged `floor_candidates`.
pub fn generate_pneunet_mesh(spec: &PneunetSpec) -> Result<Part, GeometryError> {
    if spec.resolution < 1 {
        return Err(GeometryError::BadResolution);
    }
    if spec.chambers < 1 {
        return Err(GeometryError::NoChambers);
    }
    for (name, v) in [
        ("chamber_len_mm", spec.chamber_len_mm),
        ("wall_mm", spec.wall_mm),
        ("width_mm", spec.width_mm),
        ("height_mm", spec.height_mm),
        ("bottom_mm", spec.bottom_mm),
        ("end_mm", spec.end_mm),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(GeometryError::DegenerateDimension(format!("{name} = {v}")));
        }
    }
    let pitch = spec.pitch();
    let cells = |d: f64| ((d / pitch).round() as usize).max(1);

    let c_end = cells(spec.end_mm);
    let c_cham = cells(spec.chamber_len_mm);
    let c_wall = cells(spec.wall_mm);
    let c_width = cells(spec.width_mm);
    let c_height = cells(spec.height_mm);
    let c_bottom = cells(spec.bottom_mm);
    let c_channel = if spec.channel_mm > 0.0 { cells(spec.channel_mm) } else { 0 };

    // Chambers must leave at least one material cell on every side.
    if c_width <= 2 * c_wall {
        return Err(GeometryError::DegenerateDimension("width leaves no chamber".into()));
    }
    if c_height <= c_bottom + c_wall {
        return Err(GeometryError::DegenerateDimension("height leaves no chamber".into()));
    }

    let nx = 2 * c_end + spec.chambers * c_cham + (spec.chambers - 1) * c_wall;
    let ny = c_width;
    let nz = c_height;

    let origin = Point3::new(0.0, -(ny as f64) * pitch / 2.0, 0.0);
    let mut grid = VoxelGrid::new(nx, ny, nz, [pitch; 3], origin);

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let region =
                    if k < c_bottom { Region::ConstraintLayer } else { Region::Silicone };
                grid.set(i, j, k, Cell::Solid(region));
            }
        }
    }

    // Chamber pockets: above the constraint layer, below the top wall,
    // inset from the side walls.
    let (j0, j1) = (c_wall, ny - c_wall);
    let (k0, k1) = (c_bottom, nz - c_wall);
    for chamber in 0..spec.chambers {
        let i0 = c_end + chamber * (c_cham + c_wall);
        for i in i0..i0 + c_cham {
            for j in j0..j1 {
                for k in k0..k1 {
                    grid.set(i, j, k, Cell::Air(0));
                }
            }
        }
        // Connecting channel through the interior wall to the next chamber.
        if c_channel > 0 && chamber + 1 < spec.chambers {
            for i in i0 + c_cham..i0 + c_cham + c_wall {
                for j in j0..j1 {
                    for k in k0..(k0 + c_channel).min(k1) {
                        grid.set(i, j, k, Cell::Air(0));
                    }
                }
            }
        }
    }

    grid.group_air_components();
    let (mut mesh, regions, _) = grid.mesh();
    let cavities: Vec<String> =
        mesh.face_sets.iter().map(|fs| fs.name.clone()).collect();

    let eps = 1e-9;
    let attachment = select_surface_tris(&mesh, |p| p.x.abs() < eps);
    let length = nx as f64 * pitch;
    let floor = {
        let mut tris = select_surface_tris(&mesh, |p| p.z.abs() < eps);
        tris.extend(select_surface_tris(&mesh, |p| (p.x - length).abs() < eps));
        tris.sort_unstable();
        tris
    };
    mesh.face_sets.push(super::mesh::FaceSet { name: "attachment".into(), tris: attachment });
    mesh.face_sets.push(super::mesh::FaceSet { name: "floor_candidates".into(), tris: floor });

    Ok(Part { mesh, regions, cavities, kind: PartKind::Pneunet })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::validate_mesh;

    #[test]
    fn default_leg_is_valid_with_one_shared_cavity() {
        let part = generate_pneunet_mesh(&PneunetSpec::default()).unwrap();
        assert!(validate_mesh(&part.mesh).is_empty());
        assert_eq!(part.cavities, vec!["cavity0"]);
        assert!(!part.mesh.face_set_tris("attachment").is_empty());
        assert!(!part.mesh.face_set_tris("floor_candidates").is_empty());
        // Regions partition the element set.
        assert_eq!(part.regions.len(), part.mesh.tets.len());
    }

    #[test]
    fn no_channel_gives_one_cavity_per_chamber() {
        let spec = PneunetSpec { channel_mm: 0.0, ..PneunetSpec::default() };
        let part = generate_pneunet_mesh(&spec).unwrap();
        assert_eq!(part.cavities.len(), 4);
    }

    #[test]
    fn doubling_resolution_preserves_volume() {
        let coarse = generate_pneunet_mesh(&PneunetSpec::default()).unwrap();
        let fine = generate_pneunet_mesh(&PneunetSpec {
            resolution: 2,
            ..PneunetSpec::default()
        })
        .unwrap();
        assert!(fine.mesh.num_nodes() > coarse.mesh.num_nodes());
        let (v0, v1) = (coarse.mesh.volume(), fine.mesh.volume());
        assert!(
            (v1 - v0).abs() / v0 < 0.01,
            "coarse volume {v0}, fine volume {v1}"
        );
    }

    #[test]
    fn constraint_layer_is_exactly_the_bottom_element_layer() {
        let spec = PneunetSpec::default();
        let part = generate_pneunet_mesh(&spec).unwrap();
        for (tet, region) in part.mesh.tets.iter().zip(&part.regions) {
            let max_z = tet
                .iter()
                .map(|&v| part.mesh.nodes[v as usize].z)
                .fold(f64::NEG_INFINITY, f64::max);
            let min_z = tet
                .iter()
                .map(|&v| part.mesh.nodes[v as usize].z)
                .fold(f64::INFINITY, f64::min);
            match region {
                Region::ConstraintLayer => assert!(max_z <= spec.bottom_mm + 1e-9),
                _ => assert!(min_z >= spec.bottom_mm - 1e-9),
            }
        }
    }

    #[test]
    fn zero_wall_rejected() {
        let spec = PneunetSpec { wall_mm: 0.0, ..PneunetSpec::default() };
        assert!(matches!(
            generate_pneunet_mesh(&spec),
            Err(GeometryError::DegenerateDimension(_))
        ));
    }

    #[test]
    fn attachment_face_spans_proximal_cross_section() {
        let spec = PneunetSpec::default();
        let part = generate_pneunet_mesh(&spec).unwrap();
        let c = part.mesh.face_set_centroid("attachment").unwrap();
        assert!(c.x.abs() < 1e-12);
        assert!(c.y.abs() < 1e-12);
        assert!((c.z - spec.height_mm / 2.0).abs() < 1e-9);
    }
}
