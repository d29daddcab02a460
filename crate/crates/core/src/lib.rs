//! Projection onto sparse polytopes `{x : Ax <= b}`.
//!
//! The crate is built around component-averaged Dykstra (CAD): the rows of a
//! sparse system split into independent components, each coordinate averages
//! only the constraints that touch it, and a `1/√l` rescaling makes the limit
//! the orthogonal projection. Around it sit:
//!
//! * [`projection`]: two-set, simultaneous and component-averaged Dykstra;
//! * [`gradient`]: surrogate, exact and finite-difference Jacobians of `P_C`;
//! * [`svc`]: sparse vector clipping of directions at feasible points;
//! * [`oracle`]: brute-force projections, LP vertex enumeration, hit-and-run;
//! * [`probgen`]: seeded generators for constraints and objectives;
//! * [`descent`]: gradient ascent through the projection.
//!
//! ```
//! use cadproj::{partition, cad_scaled, SolverConfig, Algorithm, SparseConstraintSystem};
//!
//! // x1 + x2 <= 0, x1 <= 5
//! let system = SparseConstraintSystem::new(2, [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)], vec![0.0, 5.0])?;
//! let parts = partition(&system);
//! let cfg = SolverConfig::new(Algorithm::CadScaled, 1e-10);
//! let r = cad_scaled(&[1.0, 1.0], &system, &parts, &cfg)?;
//! assert!(r.point.iter().all(|v| v.abs() < 1e-6));
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod descent;
pub mod error;
pub mod gradient;
pub mod io;
pub mod oracle;
pub mod partition;
pub mod probgen;
pub mod projection;
pub mod scatter;
pub mod svc;
pub mod system;

pub use error::{
    DescentError, GenError, GradientError, IoError, OracleError, ProjectionError, ScatterError, SvcError,
    SystemError,
};
pub use gradient::{
    exact_jacobian, finite_difference_jacobian, surrogate_jacobian, JacobianKind, JacobianOperator,
};
pub use partition::{partition, propagate_labels, ConstraintPartition};
pub use projection::{
    cad_raw, cad_scaled, cad_with_column_scaling, dykstra_simultaneous, dykstra_two_set, project_halfspace,
    Algorithm, ProjectionResult, Projector, SolverConfig,
};
pub use scatter::scatter;
pub use svc::{clip, clip_chain, constraint_alpha, Alpha, ClipMode, ClipReport};
pub use system::{concat, BatchedSystem, SparseConstraintSystem, SparseRow, ValidationReport};
