//! Simulation and co-optimization of pneumatically actuated crawling soft robots.
//!
//! The crate is organized around the pipeline it implements:
//!
//! * [`design`] — the discrete design space (leg placement and regulator wiring).
//! * [`geometry`] — procedural tetrahedral meshes for the disk and PneuNet parts,
//!   and their assembly into a robot mesh for any design.
//! * [`fem`] — full-order implicit soft-body dynamics with cavity pressure loads,
//!   gravity, and penalty floor contact with regularized Coulomb friction.
//! * [`mor`] — model-order reduction: snapshot collection, POD bases, ECSW
//!   hyperreduction, per-slot basis rotation, and reduced time stepping.
//! * [`gait`] — the expert sine-gait baseline, phase sweeps, bend-angle
//!   measurement, and affine pressure calibration.
//! * [`coopt`] — the joint design/control optimizer: a Gibbs design distribution
//!   with a decaying entropy target driving soft actor-critic training of a
//!   design-conditioned open-loop policy.

pub mod coopt;
pub mod design;
pub mod fem;
pub mod gait;
pub mod geometry;
pub mod mor;
pub mod util;
