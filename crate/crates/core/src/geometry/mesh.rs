//! Core mesh types, validation diagnostics, and the plain-text exchange format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use super::GeometryError;

/// Material region of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// Inflatable PneuNet silicone.
    Silicone,
    /// Stiffer bottom constraint layer of a PneuNet.
    ConstraintLayer,
    /// The central disk.
    Disk,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Silicone => "silicone",
            Region::ConstraintLayer => "constraint",
            Region::Disk => "disk",
        }
    }
}

/// A named set of surface triangles, stored as indices into
/// [`Mesh::surface_tris`].
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSet {
    pub name: String,
    pub tris: Vec<u32>,
}

/// A tetrahedral mesh with an extracted, outward-oriented boundary surface and
/// named face sets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    /// Node positions, mm.
    pub nodes: Vec<Point3<f64>>,
    /// Tetrahedra as node indices; positive signed volume.
    pub tets: Vec<[u32; 4]>,
    /// Boundary triangles wound so normals point out of the material.
    pub surface_tris: Vec<[u32; 3]>,
    /// Named subsets of the boundary (cavities, attachment, floor candidates).
    pub face_sets: Vec<FaceSet>,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Degrees of freedom: 3 per node.
    pub fn dof(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn face_set(&self, name: &str) -> Option<&FaceSet> {
        self.face_sets.iter().find(|fs| fs.name == name)
    }

    /// Triangles of a named face set.
    pub fn face_set_tris(&self, name: &str) -> Vec<[u32; 3]> {
        match self.face_set(name) {
            Some(fs) => fs.tris.iter().map(|&t| self.surface_tris[t as usize]).collect(),
            None => Vec::new(),
        }
    }

    /// Sorted unique node indices of a named face set.
    pub fn face_set_nodes(&self, name: &str) -> Vec<u32> {
        let mut nodes: Vec<u32> =
            self.face_set_tris(name).iter().flat_map(|t| t.iter().copied()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    pub fn tet_volume(&self, tet: &[u32; 4]) -> f64 {
        tet_volume(&self.nodes, tet)
    }

    /// Total volume as the sum of signed tet volumes.
    pub fn volume(&self) -> f64 {
        self.tets.iter().map(|t| self.tet_volume(t)).sum()
    }

    /// Area-weighted centroid of a face set.
    pub fn face_set_centroid(&self, name: &str) -> Option<Point3<f64>> {
        let tris = self.face_set_tris(name);
        if tris.is_empty() {
            return None;
        }
        let mut acc = Vector3::zeros();
        let mut area = 0.0;
        for t in &tris {
            let (a, b, c) = (
                self.nodes[t[0] as usize],
                self.nodes[t[1] as usize],
                self.nodes[t[2] as usize],
            );
            let tri_area = 0.5 * (b - a).cross(&(c - a)).norm();
            let centroid = (a.coords + b.coords + c.coords) / 3.0;
            acc += tri_area * centroid;
            area += tri_area;
        }
        Some(Point3::from(acc / area))
    }
}

pub fn tet_volume(nodes: &[Point3<f64>], tet: &[u32; 4]) -> f64 {
    let a = nodes[tet[0] as usize];
    let b = nodes[tet[1] as usize];
    let c = nodes[tet[2] as usize];
    let d = nodes[tet[3] as usize];
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

/// Boundary faces of a positively oriented tet, wound outward.
pub fn tet_faces(tet: &[u32; 4]) -> [[u32; 3]; 4] {
    let [a, b, c, d] = *tet;
    [[b, c, d], [a, d, c], [a, b, d], [a, c, b]]
}

/// Extracts the boundary surface of a tet soup: faces referenced by exactly
/// one tet, wound outward. Returns `(triangles, owning tet index)`.
pub fn extract_surface(tets: &[[u32; 4]]) -> (Vec<[u32; 3]>, Vec<u32>) {
    let mut seen: HashMap<[u32; 3], (usize, [u32; 3], u32)> = HashMap::new();
    for (ti, tet) in tets.iter().enumerate() {
        for face in tet_faces(tet) {
            let mut key = face;
            key.sort_unstable();
            seen.entry(key)
                .and_modify(|e| e.0 += 1)
                .or_insert((1, face, ti as u32));
        }
    }
    let mut boundary: Vec<([u32; 3], [u32; 3], u32)> = seen
        .into_iter()
        .filter(|(_, (count, _, _))| *count == 1)
        .map(|(key, (_, face, owner))| (key, face, owner))
        .collect();
    boundary.sort_unstable_by_key(|(key, _, _)| *key);
    let tris = boundary.iter().map(|(_, f, _)| *f).collect();
    let owners = boundary.iter().map(|(_, _, o)| *o).collect();
    (tris, owners)
}

/// A part: mesh plus per-element material regions, cavity face-set names,
/// and the part kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub mesh: Mesh,
    /// Material region per tet; same length as `mesh.tets`.
    pub regions: Vec<Region>,
    /// Names of cavity face sets, in deterministic order.
    pub cavities: Vec<String>,
    pub kind: PartKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartKind {
    Disk,
    Pneunet,
}

/// Mesh validity report. An empty report means the mesh is acceptable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshDiagnostics {
    /// Tets with non-positive signed volume.
    pub inverted_tets: Vec<u32>,
    /// Nodes referenced by no tet.
    pub orphan_nodes: Vec<u32>,
    /// Surface edges not shared by exactly two surface triangles.
    pub non_manifold_edges: Vec<(u32, u32)>,
    /// Indices out of range (tets or surface tris referencing missing nodes).
    pub out_of_range: Vec<u32>,
}

impl MeshDiagnostics {
    pub fn is_empty(&self) -> bool {
        self.inverted_tets.is_empty()
            && self.orphan_nodes.is_empty()
            && self.non_manifold_edges.is_empty()
            && self.out_of_range.is_empty()
    }
}

/// Reports inverted tets, orphan nodes, out-of-range indices, and non-manifold
/// surface edges.
pub fn validate_mesh(mesh: &Mesh) -> MeshDiagnostics {
    let mut diag = MeshDiagnostics::default();
    let n = mesh.nodes.len() as u32;

    let mut referenced = vec![false; mesh.nodes.len()];
    for (ti, tet) in mesh.tets.iter().enumerate() {
        let mut in_range = true;
        for &v in tet {
            if v >= n {
                diag.out_of_range.push(ti as u32);
                in_range = false;
                break;
            }
        }
        if !in_range {
            continue;
        }
        for &v in tet {
            referenced[v as usize] = true;
        }
        if mesh.tet_volume(tet) <= 0.0 {
            diag.inverted_tets.push(ti as u32);
        }
    }
    for (i, r) in referenced.iter().enumerate() {
        if !r {
            diag.orphan_nodes.push(i as u32);
        }
    }

    let mut edge_count: HashMap<(u32, u32), u32> = HashMap::new();
    for tri in &mesh.surface_tris {
        if tri.iter().any(|&v| v >= n) {
            continue;
        }
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            *edge_count.entry(key).or_insert(0) += 1;
        }
    }
    let mut bad: Vec<(u32, u32)> =
        edge_count.into_iter().filter(|&(_, c)| c != 2).map(|(e, _)| e).collect();
    bad.sort_unstable();
    diag.non_manifold_edges = bad;
    diag
}

/// Serializes a mesh to the plain-text exchange format:
///
/// ```text
/// node <x> <y> <z>
/// tet <a> <b> <c> <d>
/// surf <a> <b> <c>
/// faceset <name> <tri-index> <tri-index> ...
/// ```
///
/// Node/triangle indices are zero-based line-order positions.
pub fn mesh_to_text(mesh: &Mesh) -> String {
    let mut out = String::new();
    for p in &mesh.nodes {
        writeln!(out, "node {} {} {}", p.x, p.y, p.z).unwrap();
    }
    for t in &mesh.tets {
        writeln!(out, "tet {} {} {} {}", t[0], t[1], t[2], t[3]).unwrap();
    }
    for t in &mesh.surface_tris {
        writeln!(out, "surf {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    for fs in &mesh.face_sets {
        write!(out, "faceset {}", fs.name).unwrap();
        for t in &fs.tris {
            write!(out, " {t}").unwrap();
        }
        writeln!(out).unwrap();
    }
    out
}

pub fn mesh_from_text(text: &str) -> Result<Mesh, GeometryError> {
    let mut mesh = Mesh::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let tag = it.next().unwrap();
        let parse_err = |msg: &str| GeometryError::Parse { line: lineno + 1, msg: msg.into() };
        match tag {
            "node" => {
                let mut coords = [0.0; 3];
                for c in coords.iter_mut() {
                    *c = it
                        .next()
                        .ok_or_else(|| parse_err("missing coordinate"))?
                        .parse()
                        .map_err(|_| parse_err("bad coordinate"))?;
                }
                mesh.nodes.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            "tet" => {
                let mut idx = [0u32; 4];
                for v in idx.iter_mut() {
                    *v = it
                        .next()
                        .ok_or_else(|| parse_err("missing index"))?
                        .parse()
                        .map_err(|_| parse_err("bad index"))?;
                }
                mesh.tets.push(idx);
            }
            "surf" => {
                let mut idx = [0u32; 3];
                for v in idx.iter_mut() {
                    *v = it
                        .next()
                        .ok_or_else(|| parse_err("missing index"))?
                        .parse()
                        .map_err(|_| parse_err("bad index"))?;
                }
                mesh.surface_tris.push(idx);
            }
            "faceset" => {
                let name = it.next().ok_or_else(|| parse_err("missing name"))?.to_string();
                let mut tris = Vec::new();
                for tok in it {
                    tris.push(tok.parse().map_err(|_| parse_err("bad tri index"))?);
                }
                mesh.face_sets.push(FaceSet { name, tris });
            }
            other => return Err(parse_err(&format!("unknown record {other:?}"))),
        }
    }
    Ok(mesh)
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<(), GeometryError> {
    std::fs::write(path, mesh_to_text(mesh))?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<Mesh, GeometryError> {
    mesh_from_text(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_tet() -> Mesh {
        let nodes = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let tets = vec![[0u32, 1, 2, 3]];
        let (surface_tris, _) = extract_surface(&tets);
        Mesh { nodes, tets, surface_tris, face_sets: vec![] }
    }

    #[test]
    fn single_tet_is_valid_and_oriented() {
        let mesh = one_tet();
        assert!(validate_mesh(&mesh).is_empty());
        assert_eq!(mesh.surface_tris.len(), 4);
        // Every boundary normal points away from the centroid.
        let centroid = Point3::new(0.25, 0.25, 0.25);
        for t in &mesh.surface_tris {
            let (a, b, c) = (
                mesh.nodes[t[0] as usize],
                mesh.nodes[t[1] as usize],
                mesh.nodes[t[2] as usize],
            );
            let n = (b - a).cross(&(c - a));
            let to_face = (a.coords + b.coords + c.coords) / 3.0 - centroid.coords;
            assert!(n.dot(&to_face) > 0.0);
        }
    }

    #[test]
    fn inverted_tet_reported() {
        let mut mesh = one_tet();
        mesh.tets[0].swap(0, 1);
        let diag = validate_mesh(&mesh);
        assert_eq!(diag.inverted_tets, vec![0]);
    }

    #[test]
    fn orphan_node_reported() {
        let mut mesh = one_tet();
        mesh.nodes.push(Point3::new(5.0, 5.0, 5.0));
        let diag = validate_mesh(&mesh);
        assert_eq!(diag.orphan_nodes, vec![4]);
    }

    #[test]
    fn dangling_surface_edge_reported() {
        let mut mesh = one_tet();
        mesh.surface_tris.pop();
        let diag = validate_mesh(&mesh);
        assert!(!diag.non_manifold_edges.is_empty());
    }

    #[test]
    fn text_roundtrip() {
        let mut mesh = one_tet();
        mesh.face_sets.push(FaceSet { name: "lid".into(), tris: vec![0, 2] });
        let text = mesh_to_text(&mesh);
        let back = mesh_from_text(&text).unwrap();
        assert_eq!(mesh, back);
    }
}
