//! Floor contact: penalty normal force plus regularized Coulomb friction.

use nalgebra::Vector3;

/// Penalty floor-contact parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactConfig {
    /// Floor height, mm.
    pub floor_z: f64,
    /// Normal penalty stiffness, g/s^2.
    pub normal_stiffness: f64,
    /// Normal dashpot, g/s; dissipates impact energy so penalty contact does
    /// not chatter. Zero velocity leaves the pure spring force k_n * depth.
    pub normal_damping: f64,
    /// Tangential regularization velocity, mm/s; below it friction acts as
    /// viscous stick, above it the force saturates at the Coulomb cone.
    pub regularization_velocity: f64,
    pub friction_mu: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        ContactConfig {
            floor_z: 0.0,
            normal_stiffness: 1.0e6,
            normal_damping: 400.0,
            regularization_velocity: 0.5,
            friction_mu: 1.2,
        }
    }
}

impl ContactConfig {
    pub fn frictionless(mut self) -> Self {
        self.friction_mu = 0.0;
        self
    }
}

/// Per-node contact response.
#[derive(Debug, Clone, Copy)]
pub struct ContactPoint {
    pub node: u32,
    pub force: Vector3<f64>,
    pub normal_force: f64,
    /// Effective tangential damping `mu * f_n / max(|v_t|, eps_v)`; the
    /// friction force is exactly `-tangential_damping * v_t` in both the
    /// stick and slide regimes, so it can be treated implicitly.
    pub tangential_damping: f64,
    /// In the stick (regularized) regime, where friction behaves viscously.
    pub sticking: bool,
}

/// Evaluates contact at the listed candidate nodes. `q`/`v` are flattened
/// positions and velocities.
pub fn contact_points(
    candidates: &[u32],
    q: &[f64],
    v: &[f64],
    config: &ContactConfig,
) -> Vec<ContactPoint> {
    let mut out = Vec::new();
    for &node in candidates {
        let i = 3 * node as usize;
        let z = q[i + 2];
        let depth = config.floor_z - z;
        if depth <= 0.0 {
            continue;
        }
        let f_n = (config.normal_stiffness * depth - config.normal_damping * v[i + 2]).max(0.0);
        if f_n == 0.0 {
            continue;
        }
        let v_t = Vector3::new(v[i], v[i + 1], 0.0);
        let speed = v_t.norm();
        let mut force = Vector3::new(0.0, 0.0, f_n);
        let mut tangential_damping = 0.0;
        if config.friction_mu > 0.0 {
            tangential_damping =
                config.friction_mu * f_n / speed.max(config.regularization_velocity);
            force -= v_t * tangential_damping;
        }
        let sticking = speed <= config.regularization_velocity;
        out.push(ContactPoint { node, force, normal_force: f_n, tangential_damping, sticking });
    }
    out
}

/// The spec-level operation: per-node contact force vector (length dof).
pub fn compute_contact_forces(
    candidates: &[u32],
    q: &[f64],
    v: &[f64],
    config: &ContactConfig,
) -> Vec<f64> {
    let mut out = vec![0.0; q.len()];
    for cp in contact_points(candidates, q, v, config) {
        let i = 3 * cp.node as usize;
        out[i] += cp.force.x;
        out[i + 1] += cp.force.y;
        out[i + 2] += cp.force.z;
    }
    out
}
