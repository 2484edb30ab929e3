//! Model-order reduction: snapshot collection, POD bases, ECSW
//! hyperreduction, per-slot basis rotation, composition into design-specific
//! reduced models, and reduced-order time stepping.
//!
//! The default tolerances (mode tolerance 0.0032, hyperreduction tolerance
//! 0.0010) come from the tolerance grid search; see
//! [`eval::tolerance_grid_search`].

pub mod artifact;
pub mod ecsw;
pub mod eval;
pub mod nnls;
pub mod pod;
pub mod reduced;
pub mod snapshots;
pub mod step;

pub use artifact::{load_reduction, save_reduction};
pub use ecsw::{ecsw_weights, verify_rid_residual, ReducedIntegrationDomain};
pub use eval::{
    reduction_error, run_animation_full, run_animation_reduced, select_row,
    test_animation_suite, tolerance_grid_search, AnimationRunConfig, GridRow, GridSearchResult,
    PressureSchedule, TestAnimation, Trajectory,
};
pub use pod::{identity_basis, pod_basis, ReducedBasis, SnapshotMeta, SnapshotSet};
pub use reduced::{build_reduced_design, rotate_basis, BlockBasis, PartReduction, ReducedModel};
pub use snapshots::{
    collect_snapshots, default_snapshot_designs, gray_code_vertices, PartSnapshots,
    SnapshotConfig,
};
pub use step::{ReducedSim, ReducedSolverConfig, ReducedState};

use thiserror::Error;

/// Default POD mode tolerance.
pub const DEFAULT_MODE_TOL: f64 = 0.0032;
/// Default ECSW hyperreduction tolerance.
pub const DEFAULT_HR_TOL: f64 = 0.0010;

#[derive(Debug, Error)]
pub enum MorError {
    #[error("no snapshots available")]
    NoSnapshots,
    #[error("tolerance out of range: {0}")]
    BadTolerance(f64),
    #[error("NNLS stalled before reaching the target (best residual {best_residual:.3e})")]
    NnlsStalled { best_residual: f64 },
    #[error("basis has {found} rows, part has {expected} DOFs")]
    BasisMismatch { expected: usize, found: usize },
    #[error("trajectory length mismatch: full {full}, reduced {reduced}")]
    TrajectoryMismatch { full: usize, reduced: usize },
    #[error("reduced system factorization failed")]
    ReducedSolveFailed,
    #[error("simulation failure: {0}")]
    Fem(String),
    #[error(transparent)]
    Io(#[from] crate::util::binio::BinError),
}
