//! The assembled full-order model: precomputed elements, lumped masses, tie
//! springs, cavity surfaces, and the sparse system pattern.

use nalgebra::{Point3, Vector3};

use super::element::TetElement;
use super::material::{ElasticModel, MaterialParams, KPA_TO_INTERNAL};
use super::sparse::Csr;
use super::FemError;
use crate::geometry::{Part, Region, RobotMesh};

/// Leg-to-disk coupling spring with its rest offset, so assembly is exact.
#[derive(Debug, Clone)]
pub struct TieSpring {
    pub a: u32,
    pub b: u32,
    pub rest_offset: Vector3<f64>,
    pub stiffness: f64,
}

/// A pressurizable cavity surface: the triangles of one leg's internal air
/// pocket and the regulator it is wired to.
#[derive(Debug, Clone)]
pub struct CavitySurface {
    /// Index of the owning leg instance (0 for a standalone part).
    pub leg: usize,
    /// Regulator index the leg is wired to.
    pub regulator: usize,
    /// Triangles wound outward from the material (into the air).
    pub tris: Vec<[u32; 3]>,
}

/// One cavity face prepared for corotated dead loading: its nodes, the owning
/// element (whose rotation carries the face normal), and the rest-state area
/// normal (twice the area, pointing into the air).
#[derive(Debug, Clone)]
pub struct PressureFace {
    pub nodes: [u32; 3],
    pub owner_element: u32,
    pub rest_area_normal: nalgebra::Vector3<f64>,
    pub cavity: u32,
}

/// Pressure command: per regulator (normal operation) or per leg instance
/// (snapshot animations drive each actuator independently).
#[derive(Debug, Clone)]
pub enum PressureCommand {
    PerRegulator(Vec<f64>),
    PerLeg(Vec<f64>),
}

impl PressureCommand {
    pub fn zeros_regulators(n: usize) -> Self {
        PressureCommand::PerRegulator(vec![0.0; n])
    }

    /// Commanded kPa for a cavity, before range clamping.
    pub fn cavity_kpa(&self, leg: usize, regulator: usize) -> f64 {
        match self {
            PressureCommand::PerRegulator(p) => p.get(regulator).copied().unwrap_or(0.0),
            PressureCommand::PerLeg(p) => p.get(leg).copied().unwrap_or(0.0),
        }
    }
}

/// Precomputed full-order model of a mesh system.
pub struct FemModel {
    /// Rest positions, flattened (3 per node).
    pub rest: Vec<f64>,
    pub num_nodes: usize,
    pub elements: Vec<TetElement>,
    /// Lumped nodal mass, grams.
    pub node_mass: Vec<f64>,
    pub ties: Vec<TieSpring>,
    pub cavities: Vec<CavitySurface>,
    /// Cavity faces with owners and rest normals, for corotated dead loads.
    pub pressure_faces: Vec<PressureFace>,
    /// Nodes eligible for floor contact.
    pub contact_candidates: Vec<u32>,
    pub material: MaterialParams,
    /// Per-element scatter: value indices of the 12x12 block in the pattern.
    scatter: Vec<Box<[u32; 144]>>,
    tie_scatter: Vec<Box<[u32; 36]>>,
    /// Template sparse matrix (pattern only).
    pub pattern: Csr,
}

impl FemModel {
    /// Builds a model from raw components. `elastic` holds per-element Lamé
    /// parameters and `density` per-element densities (g/mm^3).
    #[allow(clippy::too_many_arguments)]
    pub fn from_components(
        nodes: &[Point3<f64>],
        tets: &[[u32; 4]],
        elastic: &[(f64, f64)],
        density: &[f64],
        ties: Vec<TieSpring>,
        cavities: Vec<CavitySurface>,
        contact_candidates: Vec<u32>,
        material: MaterialParams,
    ) -> Result<FemModel, FemError> {
        material.validate().map_err(FemError::BadInput)?;
        let num_nodes = nodes.len();
        let mut rest = Vec::with_capacity(3 * num_nodes);
        for p in nodes {
            rest.extend_from_slice(&[p.x, p.y, p.z]);
        }

        let mut elements = Vec::with_capacity(tets.len());
        let mut node_mass = vec![0.0; num_nodes];
        for (ei, tet) in tets.iter().enumerate() {
            let p = [
                nodes[tet[0] as usize],
                nodes[tet[1] as usize],
                nodes[tet[2] as usize],
                nodes[tet[3] as usize],
            ];
            let (lambda, mu) = elastic[ei];
            let elem = TetElement::new(*tet, p, lambda, mu);
            let m = density[ei] * elem.volume / 4.0;
            for &v in tet {
                node_mass[v as usize] += m;
            }
            elements.push(elem);
        }

        let pairs = elements
            .iter()
            .flat_map(|e| {
                let n = e.nodes;
                [
                    (n[0], n[1]),
                    (n[0], n[2]),
                    (n[0], n[3]),
                    (n[1], n[2]),
                    (n[1], n[3]),
                    (n[2], n[3]),
                ]
            })
            .chain(ties.iter().map(|t| (t.a, t.b)));
        let pattern = Csr::from_node_pairs(num_nodes, pairs);

        let mut scatter = Vec::with_capacity(elements.len());
        for e in &elements {
            let mut idx = Box::new([0u32; 144]);
            for (ai, &a) in e.nodes.iter().enumerate() {
                for (bi, &b) in e.nodes.iter().enumerate() {
                    for r in 0..3 {
                        for c in 0..3 {
                            let local = (3 * ai + r) * 12 + 3 * bi + c;
                            idx[local] = pattern
                                .entry_index(3 * a as usize + r, 3 * b as usize + c)
                                as u32;
                        }
                    }
                }
            }
            scatter.push(idx);
        }
        let mut tie_scatter = Vec::with_capacity(ties.len());
        for t in &ties {
            let mut idx = Box::new([0u32; 36]);
            let nodes = [t.a, t.b];
            for (ai, &a) in nodes.iter().enumerate() {
                for (bi, &b) in nodes.iter().enumerate() {
                    for r in 0..3 {
                        for c in 0..3 {
                            let local = (3 * ai + r) * 6 + 3 * bi + c;
                            idx[local] = pattern
                                .entry_index(3 * a as usize + r, 3 * b as usize + c)
                                as u32;
                        }
                    }
                }
            }
            tie_scatter.push(idx);
        }

        // Resolve each cavity face to its owning element so pressure forces
        // can be carried by that element's rotation.
        let mut face_owner: std::collections::HashMap<[u32; 3], u32> = std::collections::HashMap::new();
        for (ei, tet) in tets.iter().enumerate() {
            for f in crate::geometry::mesh_tet_faces(tet) {
                let mut key = f;
                key.sort_unstable();
                face_owner.insert(key, ei as u32);
            }
        }
        let mut pressure_faces = Vec::new();
        for (ci, cav) in cavities.iter().enumerate() {
            for tri in &cav.tris {
                let mut key = *tri;
                key.sort_unstable();
                let owner = *face_owner
                    .get(&key)
                    .ok_or_else(|| FemError::BadInput("cavity face not on any element".into()))?;
                let a = nodes[tri[0] as usize];
                let b = nodes[tri[1] as usize];
                let c = nodes[tri[2] as usize];
                pressure_faces.push(PressureFace {
                    nodes: *tri,
                    owner_element: owner,
                    rest_area_normal: (b - a).cross(&(c - a)),
                    cavity: ci as u32,
                });
            }
        }

        Ok(FemModel {
            rest,
            num_nodes,
            elements,
            node_mass,
            ties,
            cavities,
            pressure_faces,
            contact_candidates,
            material,
            scatter,
            tie_scatter,
            pattern,
        })
    }

    /// Model of an assembled robot. Part densities come from the part masses
    /// over their meshed volumes.
    pub fn from_robot(robot: &RobotMesh, material: &MaterialParams) -> Result<FemModel, FemError> {
        let leg_volume = robot.leg_part.mesh.volume();
        let disk_volume = robot.disk_part.mesh.volume();
        let rho_leg = material.pneunet_mass_g / leg_volume;
        let rho_disk = material.disk_mass_g / disk_volume;

        let elastic: Vec<(f64, f64)> =
            robot.regions.iter().map(|r| material.region(*r).lame()).collect();
        let density: Vec<f64> = robot
            .regions
            .iter()
            .map(|r| match r {
                Region::Disk => rho_disk,
                _ => rho_leg,
            })
            .collect();

        let ties = robot
            .ties
            .iter()
            .map(|&(a, b)| TieSpring {
                a,
                b,
                rest_offset: robot.mesh.nodes[a as usize] - robot.mesh.nodes[b as usize],
                stiffness: material.tie_stiffness,
            })
            .collect();

        let mut cavities = Vec::new();
        for (leg_idx, inst) in robot.legs.iter().enumerate() {
            for set in &inst.cavity_sets {
                cavities.push(CavitySurface {
                    leg: leg_idx,
                    regulator: inst.regulator,
                    tris: robot.mesh.face_set_tris(set),
                });
            }
        }

        FemModel::from_components(
            &robot.mesh.nodes,
            &robot.mesh.tets,
            &elastic,
            &density,
            ties,
            cavities,
            robot.contact_candidates.clone(),
            material.clone(),
        )
    }

    /// Model of a standalone part (e.g. a clamped leg on a test bench).
    pub fn from_part(part: &Part, material: &MaterialParams) -> Result<FemModel, FemError> {
        let mass = match part.kind {
            crate::geometry::PartKind::Pneunet => material.pneunet_mass_g,
            crate::geometry::PartKind::Disk => material.disk_mass_g,
        };
        let rho = mass / part.mesh.volume();
        let elastic: Vec<(f64, f64)> =
            part.regions.iter().map(|r| material.region(*r).lame()).collect();
        let density = vec![rho; part.mesh.tets.len()];
        let cavities = part
            .cavities
            .iter()
            .map(|name| CavitySurface {
                leg: 0,
                regulator: 0,
                tris: part.mesh.face_set_tris(name),
            })
            .collect();
        let candidates = part.mesh.face_set_nodes("floor_candidates");
        FemModel::from_components(
            &part.mesh.nodes,
            &part.mesh.tets,
            &elastic,
            &density,
            Vec::new(),
            cavities,
            candidates,
            material.clone(),
        )
    }

    pub fn dof(&self) -> usize {
        3 * self.num_nodes
    }

    /// Position of one node from a flattened state vector.
    pub fn node_point(q: &[f64], node: u32) -> Point3<f64> {
        let i = 3 * node as usize;
        Point3::new(q[i], q[i + 1], q[i + 2])
    }

    /// Corotational (or linear) element matrix and internal force at the
    /// current positions. Returns the warped stiffness and the nodal internal
    /// force of the element.
    pub fn element_response(
        &self,
        ei: usize,
        q: &[f64],
    ) -> Result<(super::element::ElemMat, super::element::ElemVec), FemError> {
        let elem = &self.elements[ei];
        let mut x = super::element::ElemVec::zeros();
        let mut x0 = super::element::ElemVec::zeros();
        for (a, &node) in elem.nodes.iter().enumerate() {
            for c in 0..3 {
                x[3 * a + c] = q[3 * node as usize + c];
                x0[3 * a + c] = self.rest[3 * node as usize + c];
            }
        }
        match self.material.elastic_model {
            ElasticModel::Linear => {
                let f = -(elem.stiffness * (x - x0));
                Ok((elem.stiffness, f))
            }
            ElasticModel::Corotational => {
                let pts = [
                    Point3::new(x[0], x[1], x[2]),
                    Point3::new(x[3], x[4], x[5]),
                    Point3::new(x[6], x[7], x[8]),
                    Point3::new(x[9], x[10], x[11]),
                ];
                let f_grad = elem.deformation_gradient(&pts);
                let r = super::element::polar_rotation(&f_grad)
                    .ok_or(FemError::InvertedElement { element: ei })?;
                // Block-rotate: K_hat = R K R^T, f = -R K (R^T x - x0).
                let mut rx = super::element::ElemVec::zeros();
                for a in 0..4 {
                    let seg = Vector3::new(x[3 * a], x[3 * a + 1], x[3 * a + 2]);
                    let rot = r.transpose() * seg;
                    for c in 0..3 {
                        rx[3 * a + c] = rot[c];
                    }
                }
                let f_local = elem.stiffness * (rx - x0);
                let mut f = super::element::ElemVec::zeros();
                let mut k_hat = super::element::ElemMat::zeros();
                for a in 0..4 {
                    let seg = Vector3::new(f_local[3 * a], f_local[3 * a + 1], f_local[3 * a + 2]);
                    let rot = -(r * seg);
                    for c in 0..3 {
                        f[3 * a + c] = rot[c];
                    }
                }
                for a in 0..4 {
                    for b in 0..4 {
                        let block = elem.stiffness.fixed_view::<3, 3>(3 * a, 3 * b);
                        let warped = r * block * r.transpose();
                        k_hat.fixed_view_mut::<3, 3>(3 * a, 3 * b).copy_from(&warped);
                    }
                }
                Ok((k_hat, f))
            }
        }
    }

    /// Internal force of an element without building the warped stiffness;
    /// cheaper for residual-only evaluations. The unused first tuple slot
    /// keeps the signature parallel to [`Self::element_response`].
    pub fn element_force_only(
        &self,
        ei: usize,
        q: &[f64],
    ) -> Result<((), super::element::ElemVec), FemError> {
        let elem = &self.elements[ei];
        let mut x = super::element::ElemVec::zeros();
        let mut x0 = super::element::ElemVec::zeros();
        for (a, &node) in elem.nodes.iter().enumerate() {
            for c in 0..3 {
                x[3 * a + c] = q[3 * node as usize + c];
                x0[3 * a + c] = self.rest[3 * node as usize + c];
            }
        }
        match self.material.elastic_model {
            ElasticModel::Linear => Ok(((), -(elem.stiffness * (x - x0)))),
            ElasticModel::Corotational => {
                let pts = [
                    Point3::new(x[0], x[1], x[2]),
                    Point3::new(x[3], x[4], x[5]),
                    Point3::new(x[6], x[7], x[8]),
                    Point3::new(x[9], x[10], x[11]),
                ];
                let f_grad = elem.deformation_gradient(&pts);
                let r = super::element::polar_rotation(&f_grad)
                    .ok_or(FemError::InvertedElement { element: ei })?;
                let mut rx = super::element::ElemVec::zeros();
                for a in 0..4 {
                    let seg = Vector3::new(x[3 * a], x[3 * a + 1], x[3 * a + 2]);
                    let rot = r.transpose() * seg;
                    for c in 0..3 {
                        rx[3 * a + c] = rot[c];
                    }
                }
                let f_local = elem.stiffness * (rx - x0);
                let mut f = super::element::ElemVec::zeros();
                for a in 0..4 {
                    let seg =
                        Vector3::new(f_local[3 * a], f_local[3 * a + 1], f_local[3 * a + 2]);
                    let rot = -(r * seg);
                    for c in 0..3 {
                        f[3 * a + c] = rot[c];
                    }
                }
                Ok(((), f))
            }
        }
    }

    /// Tie-spring force on node `a` (the opposite acts on `b`).
    pub fn tie_force(&self, tie: &TieSpring, q: &[f64]) -> Vector3<f64> {
        let pa = Self::node_point(q, tie.a);
        let pb = Self::node_point(q, tie.b);
        -tie.stiffness * ((pa - pb) - tie.rest_offset)
    }

    /// Nodal pressure forces of every cavity, accumulated into `out`
    /// (length dof). Each face applies its rest-state load rotated by the
    /// owning element's corotational rotation: the force follows the
    /// material's orientation but not its stretch, which keeps the follower
    /// coupling out of the implicit system. Pressures are clamped to the
    /// admissible range and converted from kPa.
    pub fn accumulate_pressure_forces(
        &self,
        q: &[f64],
        pressures: &PressureCommand,
        out: &mut [f64],
    ) -> Result<(), FemError> {
        let corotate = matches!(self.material.elastic_model, ElasticModel::Corotational);
        let mut rotations: std::collections::HashMap<u32, nalgebra::Matrix3<f64>> =
            std::collections::HashMap::new();
        for face in &self.pressure_faces {
            let cav = &self.cavities[face.cavity as usize];
            let kpa =
                super::material::clamp_pressure_kpa(pressures.cavity_kpa(cav.leg, cav.regulator));
            if kpa == 0.0 {
                continue;
            }
            let p = kpa * KPA_TO_INTERNAL;
            let n2 = if corotate {
                let r = match rotations.entry(face.owner_element) {
                    std::collections::hash_map::Entry::Occupied(e) => *e.get(),
                    std::collections::hash_map::Entry::Vacant(slot) => {
                        let elem = &self.elements[face.owner_element as usize];
                        let pts = [
                            Self::node_point(q, elem.nodes[0]),
                            Self::node_point(q, elem.nodes[1]),
                            Self::node_point(q, elem.nodes[2]),
                            Self::node_point(q, elem.nodes[3]),
                        ];
                        let f_grad = elem.deformation_gradient(&pts);
                        let r = super::element::polar_rotation(&f_grad).ok_or(
                            FemError::InvertedElement { element: face.owner_element as usize },
                        )?;
                        *slot.insert(r)
                    }
                };
                r * face.rest_area_normal
            } else {
                face.rest_area_normal
            };
            // Faces are wound outward from the material; pressure pushes the
            // wall away from the air, along -normal.
            let f = n2 * (-p / 6.0);
            for &v in &face.nodes {
                let i = 3 * v as usize;
                out[i] += f.x;
                out[i + 1] += f.y;
                out[i + 2] += f.z;
            }
        }
        Ok(())
    }

    pub fn scatter_element(&self, ei: usize, k: &super::element::ElemMat, factor: f64, a: &mut Csr) {
        let idx = &self.scatter[ei];
        for local in 0..144 {
            let (r, c) = (local / 12, local % 12);
            a.values[idx[local] as usize] += factor * k[(r, c)];
        }
    }

    pub fn scatter_tie(&self, ti: usize, factor: f64, a: &mut Csr) {
        let k = self.ties[ti].stiffness;
        let idx = &self.tie_scatter[ti];
        // K_tie = k * [[I, -I], [-I, I]] on the 6 DOFs of the pair.
        for ai in 0..2 {
            for bi in 0..2 {
                let sign = if ai == bi { 1.0 } else { -1.0 };
                for r in 0..3 {
                    let local = (3 * ai + r) * 6 + 3 * bi + r;
                    a.values[idx[local] as usize] += factor * sign * k;
                }
            }
        }
    }
}
