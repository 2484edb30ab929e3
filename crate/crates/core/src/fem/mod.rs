//! Full-order soft-body dynamics: implicit time stepping with linear or
//! corotational elasticity, pneumatic cavity pressure loads, gravity, and
//! penalty floor contact with regularized Coulomb friction.

pub mod contact;
pub mod element;
pub mod integrate;
pub mod material;
pub mod model;
pub mod sparse;
pub mod statics;

pub use contact::{compute_contact_forces, contact_points, ContactConfig, ContactPoint};
pub use integrate::{FullOrderSim, FullOrderState, SolverConfig, SystemMatrices};
pub use material::{
    clamp_pressure_kpa, ElasticModel, ElasticRegion, MaterialParams, KPA_TO_INTERNAL,
    PRESSURE_RANGE_KPA,
};
pub use model::{CavitySurface, FemModel, PressureCommand, TieSpring};
pub use statics::{static_solve, StaticMode, StaticProblem};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("element {element} inverted during polar decomposition")]
    InvertedElement { element: usize },
    #[error(transparent)]
    Solve(#[from] sparse::SolveError),
    #[error("static solve did not converge (residual {residual:.3e})")]
    StaticsNoConvergence { residual: f64 },
    #[error("invalid input: {0}")]
    BadInput(String),
}
