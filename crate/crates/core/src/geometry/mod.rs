//! Procedural tetrahedral meshes for the two part types (central disk and
//! PneuNet leg) and their assembly into a robot mesh for any design.
//!
//! Units are millimetres throughout. The canonical leg frame has the
//! attachment face at `x = 0`, the leg extending toward `+x`, and the
//! constraint layer at the bottom (`z = 0`); the floor is the `z = 0` plane.

mod assemble;
mod disk;
mod mesh;
mod pneunet;
mod voxel;

pub use assemble::{assemble_robot_mesh, assemble_robot_mesh_any, LegInstance, PlacementFrame, RobotMesh};
pub use disk::{generate_disk_mesh, DiskSpec};
pub use mesh::{
    mesh_from_text, mesh_to_text, read_mesh, validate_mesh, write_mesh, FaceSet, Mesh,
    MeshDiagnostics, Part, PartKind, Region,
};
pub use mesh::tet_faces as mesh_tet_faces;
pub use pneunet::{generate_pneunet_mesh, PneunetSpec};

use nalgebra::Point3;
use thiserror::Error;

/// Rectangular solid bar of `nx x ny x nz` cells at the given pitch, with its
/// corner at the origin. Used by solver validation (cantilever benches) and
/// as a minimal fixture elsewhere.
pub fn generate_bar_part(
    nx: usize,
    ny: usize,
    nz: usize,
    pitch_mm: f64,
    region: Region,
) -> Part {
    let mut grid = voxel::VoxelGrid::new(nx, ny, nz, [pitch_mm; 3], Point3::origin());
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                grid.set(i, j, k, voxel::Cell::Solid(region));
            }
        }
    }
    let (mut mesh, regions, _) = grid.mesh();
    let floor = {
        let eps = 1e-9;
        voxel::select_surface_tris(&mesh, |p| p.z.abs() < eps)
    };
    mesh.face_sets.push(FaceSet { name: "floor_candidates".into(), tris: floor });
    let kind = match region {
        Region::Disk => PartKind::Disk,
        _ => PartKind::Pneunet,
    };
    Part { mesh, regions, cavities: Vec::new(), kind }
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate dimension: {0}")]
    DegenerateDimension(String),
    #[error("resolution must be >= 1")]
    BadResolution,
    #[error("chamber count must be >= 1")]
    NoChambers,
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
