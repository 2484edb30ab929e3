//! Material and simulation parameters.
//!
//! Internal units are millimetres, grams, and seconds, in which the stress
//! unit is exactly one pascal; quantities given in kPa are converted by
//! [`KPA_TO_INTERNAL`] at the module boundary.

use nalgebra::Vector3;

/// kPa to internal stress units (g / (mm s^2) = Pa): multiply by 1000.
pub const KPA_TO_INTERNAL: f64 = 1000.0;

/// The commanded pressure range, kPa.
pub const PRESSURE_RANGE_KPA: (f64, f64) = (0.0, 90.0);

/// Clamps a commanded pressure to the simulator's admissible range.
pub fn clamp_pressure_kpa(p: f64) -> f64 {
    p.clamp(PRESSURE_RANGE_KPA.0, PRESSURE_RANGE_KPA.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticRegion {
    pub youngs_kpa: f64,
    pub poisson: f64,
}

impl ElasticRegion {
    /// Lamé parameters in internal stress units.
    pub fn lame(&self) -> (f64, f64) {
        let e = self.youngs_kpa * KPA_TO_INTERNAL;
        let nu = self.poisson;
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mu = e / (2.0 * (1.0 + nu));
        (lambda, mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElasticModel {
    /// Small-strain linear elasticity about the rest configuration.
    Linear,
    /// Linear elasticity in a per-element rotated frame (stiffness warping),
    /// handling the large rotations of bending legs.
    Corotational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    pub silicone: ElasticRegion,
    pub constraint_layer: ElasticRegion,
    pub disk: ElasticRegion,
    /// Total PneuNet mass, grams.
    pub pneunet_mass_g: f64,
    /// Total disk mass, grams.
    pub disk_mass_g: f64,
    /// Rayleigh damping: C = alpha * M + beta * K.
    pub rayleigh_alpha: f64,
    pub rayleigh_beta: f64,
    /// Floor Coulomb friction coefficient.
    pub friction_mu: f64,
    /// Gravity, mm/s^2.
    pub gravity: Vector3<f64>,
    pub elastic_model: ElasticModel,
    /// Stiffness of the leg-to-disk tie springs, g/s^2.
    pub tie_stiffness: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            silicone: ElasticRegion { youngs_kpa: 1160.0, poisson: 0.2 },
            constraint_layer: ElasticRegion { youngs_kpa: 2320.0, poisson: 0.49 },
            disk: ElasticRegion { youngs_kpa: 5000.0, poisson: 0.3 },
            pneunet_mass_g: 105.0,
            disk_mass_g: 75.0,
            rayleigh_alpha: 0.0,
            rayleigh_beta: 0.005,
            friction_mu: 1.2,
            gravity: Vector3::new(0.0, 0.0, -9800.0),
            elastic_model: ElasticModel::Corotational,
            tie_stiffness: 1.0e6,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, r) in [
            ("silicone", self.silicone),
            ("constraint_layer", self.constraint_layer),
            ("disk", self.disk),
        ] {
            if !(r.youngs_kpa > 0.0) {
                return Err(format!("{name}: Young's modulus must be positive"));
            }
            if !(0.0..0.5).contains(&r.poisson) {
                return Err(format!("{name}: Poisson ratio must be in [0, 0.5)"));
            }
        }
        if !(self.pneunet_mass_g > 0.0) || !(self.disk_mass_g > 0.0) {
            return Err("part masses must be positive".into());
        }
        if self.friction_mu < 0.0 {
            return Err("friction coefficient must be nonnegative".into());
        }
        Ok(())
    }

    pub fn region(&self, r: crate::geometry::Region) -> ElasticRegion {
        match r {
            crate::geometry::Region::Silicone => self.silicone,
            crate::geometry::Region::ConstraintLayer => self.constraint_layer,
            crate::geometry::Region::Disk => self.disk,
        }
    }
}
