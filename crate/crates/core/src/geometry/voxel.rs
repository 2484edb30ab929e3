//! Structured voxel grid meshed with the Freudenthal 6-tet split.
//!
//! Every cell is split the same way along the main diagonal, which makes the
//! triangulation conforming across neighboring cells without any per-cell
//! casework. Cells are classified as solid (with a material region), air
//! (an internal cavity), or outside; only solid cells produce elements.

use std::collections::HashMap;

use nalgebra::Point3;

use super::mesh::{extract_surface, tet_faces, FaceSet, Mesh, Region};

/// Cell classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Outside,
    /// Internal air; the payload is a cavity group id.
    Air(u16),
    Solid(Region),
}

pub struct VoxelGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Cell pitch per axis, mm.
    pub pitch: [f64; 3],
    /// Position of lattice point (0, 0, 0).
    pub origin: Point3<f64>,
    cells: Vec<Cell>,
}

/// Offsets of the 6 Freudenthal tets in lattice-corner coordinates. Each tet
/// follows a monotone corner path from (0,0,0) to (1,1,1), so all six share
/// the cell's main diagonal and have positive volume.
const TET_CORNERS: [[[usize; 3]; 4]; 6] = [
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1]],
    [[0, 0, 0], [1, 1, 0], [0, 1, 0], [1, 1, 1]],
    [[0, 0, 0], [0, 1, 0], [0, 1, 1], [1, 1, 1]],
    [[0, 0, 0], [0, 1, 1], [0, 0, 1], [1, 1, 1]],
    [[0, 0, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1]],
    [[0, 0, 0], [1, 0, 1], [1, 0, 0], [1, 1, 1]],
];

impl VoxelGrid {
    pub fn new(nx: usize, ny: usize, nz: usize, pitch: [f64; 3], origin: Point3<f64>) -> Self {
        VoxelGrid { nx, ny, nz, pitch, origin, cells: vec![Cell::Outside; nx * ny * nz] }
    }

    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, cell: Cell) {
        let idx = self.cell_index(i, j, k);
        self.cells[idx] = cell;
    }

    pub fn get(&self, i: isize, j: isize, k: isize) -> Cell {
        if i < 0
            || j < 0
            || k < 0
            || i as usize >= self.nx
            || j as usize >= self.ny
            || k as usize >= self.nz
        {
            return Cell::Outside;
        }
        self.cells[self.cell_index(i as usize, j as usize, k as usize)]
    }

    /// Center of a cell, mm.
    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        Point3::new(
            self.origin.x + (i as f64 + 0.5) * self.pitch[0],
            self.origin.y + (j as f64 + 0.5) * self.pitch[1],
            self.origin.z + (k as f64 + 0.5) * self.pitch[2],
        )
    }

    /// Relabels every connected component of air cells (6-connectivity) with
    /// its own cavity id, in deterministic scan order. Returns the count.
    pub fn group_air_components(&mut self) -> u16 {
        let mut group = vec![u16::MAX; self.cells.len()];
        let mut next = 0u16;
        for start in 0..self.cells.len() {
            if !matches!(self.cells[start], Cell::Air(_)) || group[start] != u16::MAX {
                continue;
            }
            let mut stack = vec![start];
            group[start] = next;
            while let Some(idx) = stack.pop() {
                let i = (idx % self.nx) as isize;
                let j = ((idx / self.nx) % self.ny) as isize;
                let k = (idx / (self.nx * self.ny)) as isize;
                for (di, dj, dk) in
                    [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
                {
                    let (ni, nj, nk) = (i + di, j + dj, k + dk);
                    if let Cell::Air(_) = self.get(ni, nj, nk) {
                        let nidx = self.cell_index(ni as usize, nj as usize, nk as usize);
                        if group[nidx] == u16::MAX {
                            group[nidx] = next;
                            stack.push(nidx);
                        }
                    }
                }
            }
            next += 1;
        }
        for (cell, g) in self.cells.iter_mut().zip(group) {
            if let Cell::Air(id) = cell {
                *id = g;
            }
        }
        next
    }

    /// Meshes the solid cells. Returns the mesh (surface extracted, cavity face
    /// sets named `cavity<i>`), per-tet regions, and the cavity count.
    pub fn mesh(&self) -> (Mesh, Vec<Region>, u16) {
        let mut node_ids: HashMap<(usize, usize, usize), u32> = HashMap::new();
        let mut nodes: Vec<Point3<f64>> = Vec::new();
        let mut tets: Vec<[u32; 4]> = Vec::new();
        let mut regions: Vec<Region> = Vec::new();
        let mut tet_cell: Vec<(usize, usize, usize)> = Vec::new();

        let node_at = |node_ids: &mut HashMap<(usize, usize, usize), u32>,
                           nodes: &mut Vec<Point3<f64>>,
                           i: usize,
                           j: usize,
                           k: usize| {
            *node_ids.entry((i, j, k)).or_insert_with(|| {
                let id = nodes.len() as u32;
                nodes.push(Point3::new(
                    self.origin.x + i as f64 * self.pitch[0],
                    self.origin.y + j as f64 * self.pitch[1],
                    self.origin.z + k as f64 * self.pitch[2],
                ));
                id
            })
        };

        for k in 0..self.nz {
            for j in 0..self.ny {
                for i in 0..self.nx {
                    let region = match self.get(i as isize, j as isize, k as isize) {
                        Cell::Solid(r) => r,
                        _ => continue,
                    };
                    for corners in TET_CORNERS {
                        let mut tet = [0u32; 4];
                        for (v, c) in tet.iter_mut().zip(corners) {
                            *v = node_at(&mut node_ids, &mut nodes, i + c[0], j + c[1], k + c[2]);
                        }
                        tets.push(tet);
                        regions.push(region);
                        tet_cell.push((i, j, k));
                    }
                }
            }
        }

        let (surface_tris, owners) = extract_surface(&tets);

        // Assign each boundary triangle to the void it borders: the neighbor
        // cell across the axis-aligned plane the face lies on.
        let mut cavity_tris: HashMap<u16, Vec<u32>> = HashMap::new();
        let mut max_cavity = 0u16;
        for (si, tri) in surface_tris.iter().enumerate() {
            let owner_tet = owners[si] as usize;
            let (ci, cj, ck) = tet_cell[owner_tet];
            // The face plane is constant along exactly one axis at a lattice
            // coordinate; decide inside/outside by comparing to cell bounds.
            let pts = [
                nodes[tri[0] as usize],
                nodes[tri[1] as usize],
                nodes[tri[2] as usize],
            ];
            let cell = [ci as isize, cj as isize, ck as isize];
            let mut neighbor = cell;
            for axis in 0..3 {
                let coord0 = pts[0][axis];
                if (pts[1][axis] - coord0).abs() < 1e-12 && (pts[2][axis] - coord0).abs() < 1e-12 {
                    let lattice =
                        ((coord0 - self.origin[axis]) / self.pitch[axis]).round() as isize;
                    if lattice == cell[axis] {
                        neighbor[axis] -= 1;
                    } else {
                        neighbor[axis] += 1;
                    }
                    break;
                }
            }
            if let Cell::Air(id) = self.get(neighbor[0], neighbor[1], neighbor[2]) {
                cavity_tris.entry(id).or_default().push(si as u32);
                max_cavity = max_cavity.max(id + 1);
            }
        }

        let mut face_sets = Vec::new();
        for id in 0..max_cavity {
            if let Some(tris) = cavity_tris.remove(&id) {
                face_sets.push(FaceSet { name: format!("cavity{id}"), tris });
            }
        }

        let mesh = Mesh { nodes, tets, surface_tris, face_sets };
        (mesh, regions, max_cavity)
    }
}

/// Collects boundary-triangle indices whose vertices all satisfy `pred`.
pub fn select_surface_tris(mesh: &Mesh, pred: impl Fn(&Point3<f64>) -> bool) -> Vec<u32> {
    mesh.surface_tris
        .iter()
        .enumerate()
        .filter(|(_, tri)| tri.iter().all(|&v| pred(&mesh.nodes[v as usize])))
        .map(|(i, _)| i as u32)
        .collect()
}

/// Sanity check used by generators in debug builds: every face of every tet
/// either matches a neighbor or lies on the extracted surface.
#[allow(dead_code)]
pub fn assert_conforming(tets: &[[u32; 4]], surface: &[[u32; 3]]) {
    let mut count: HashMap<[u32; 3], u32> = HashMap::new();
    for tet in tets {
        for f in tet_faces(tet) {
            let mut key = f;
            key.sort_unstable();
            *count.entry(key).or_insert(0) += 1;
        }
    }
    let boundary = count.values().filter(|&&c| c == 1).count();
    assert_eq!(boundary, surface.len());
    assert!(count.values().all(|&c| c <= 2));
}
