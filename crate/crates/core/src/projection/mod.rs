//! Dykstra-family projections onto `C = {x : Ax <= b}`.
//!
//! Four algorithms share one result type:
//!
//! * [`dykstra_two_set`]: classic two-set Dykstra over arbitrary convex sets.
//! * [`dykstra_simultaneous`]: averages all `m` halfspace projections.
//! * [`cad_raw`]: component-averaged Dykstra; averages each coordinate over
//!   the `l_j` constraints touching it. Converges to the `l`-weighted
//!   projection `argmin_{y∈C} Σ l_j (y_j - x_j)²`.
//! * [`cad_scaled`]: the same iteration run in coordinates scaled by
//!   `1/√l`, which turns the weighted limit into the orthogonal projection.
//!
//! All of them stop on primal feasibility: `max_i (A_i x - b_i)/‖A_i‖ <= ε`.
//! The CAD variants run every component of the constraint partition on its
//! own, with its own stopping test and iteration count.

mod cad;
mod two_set;

pub use cad::{
    cad_raw, cad_scaled, cad_with_column_scaling, dykstra_simultaneous, CadState, CorrectionState,
};
pub use two_set::{dykstra_two_set, ConvexSet, Halfspace, Hyperplane};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ProjectionError;
use crate::partition::{partition, ConstraintPartition};
use crate::system::{SparseConstraintSystem, SparseRow};

use cad::PreparedComponents;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    TwoSet,
    Simultaneous,
    CadRaw,
    CadScaled,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::TwoSet => "two-set",
            Algorithm::Simultaneous => "simul",
            Algorithm::CadRaw => "cad-raw",
            Algorithm::CadScaled => "cad",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-set" => Ok(Algorithm::TwoSet),
            "simul" | "simultaneous" => Ok(Algorithm::Simultaneous),
            "cad-raw" => Ok(Algorithm::CadRaw),
            "cad" | "cad-scaled" => Ok(Algorithm::CadScaled),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Feasibility tolerance on unit-normalized rows.
    pub epsilon: f64,
    /// Iteration cap, per component.
    pub max_iterations: usize,
    pub algorithm: Algorithm,
    /// Run independent components on the rayon pool.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iterations: 100_000,
            algorithm: Algorithm::CadScaled,
            parallel: false,
        }
    }
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, epsilon: f64) -> Self {
        Self {
            algorithm,
            epsilon,
            ..Self::default()
        }
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub(crate) fn check(&self) -> Result<(), ProjectionError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ProjectionError::Config("epsilon must be positive and finite"));
        }
        if self.max_iterations == 0 {
            return Err(ProjectionError::Config("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    /// The last iterate.
    pub point: Vec<f64>,
    /// Iterations used by each component (a single entry for the
    /// non-partitioned algorithms).
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Final normalized violation of each component.
    pub component_violations: Vec<f64>,
    /// `max_i (A_i x - b_i)/‖A_i‖` at the returned point.
    pub violation: f64,
    /// `input - point`.
    pub dual: Vec<f64>,
    /// How often `‖x - x_k‖` went down between iterations. Expected to stay
    /// zero; only monitored.
    pub distance_decreases: usize,
}

impl ProjectionResult {
    pub fn max_iterations(&self) -> usize {
        self.iterations.iter().copied().max().unwrap_or(0)
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }

    pub fn dual_norm(&self) -> f64 {
        self.dual.iter().map(|d| d * d).sum::<f64>().sqrt()
    }
}

/// Closed-form projection onto `{x : A_i x <= b_i}`.
pub fn project_halfspace(x: &[f64], row: SparseRow<'_>, b: f64) -> Result<Vec<f64>, ProjectionError> {
    let norm2 = row.norm_squared();
    if norm2 == 0.0 {
        return Err(ProjectionError::ZeroNormRow);
    }
    let step = ((b - row.dot(x)) / norm2).min(0.0);
    let mut out = x.to_vec();
    for (&j, &a) in row.cols.iter().zip(row.values) {
        out[j] += step * a;
    }
    Ok(out)
}

/// A constraint system bound to a solver configuration, with the partition
/// and per-component work prepared once.
#[derive(Debug, Clone)]
pub struct Projector<'a> {
    system: &'a SparseConstraintSystem,
    partition: ConstraintPartition,
    config: SolverConfig,
    prepared: PreparedComponents,
}

impl<'a> Projector<'a> {
    pub fn new(system: &'a SparseConstraintSystem, config: SolverConfig) -> Result<Self, ProjectionError> {
        config.check()?;
        if !system.is_valid() {
            return Err(ProjectionError::InvalidSystem);
        }
        if config.algorithm == Algorithm::TwoSet && system.m() != 2 {
            return Err(ProjectionError::NotTwoSets(system.m()));
        }
        let partition = partition(system);
        let prepared = match config.algorithm {
            Algorithm::CadScaled => PreparedComponents::new(system, &partition, ScaleRule::SqrtDegree),
            Algorithm::CadRaw => PreparedComponents::new(system, &partition, ScaleRule::Unit),
            Algorithm::Simultaneous => {
                PreparedComponents::new(system, &ConstraintPartition::trivial(system), ScaleRule::Unit)
            }
            Algorithm::TwoSet => PreparedComponents::default(),
        };
        Ok(Self {
            system,
            partition,
            config,
            prepared,
        })
    }

    pub fn system(&self) -> &'a SparseConstraintSystem {
        self.system
    }

    pub fn partition(&self) -> &ConstraintPartition {
        &self.partition
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn project(&self, x: &[f64]) -> Result<ProjectionResult, ProjectionError> {
        check_dimension(self.system, x)?;
        match self.config.algorithm {
            Algorithm::TwoSet => {
                let c1 = Halfspace::from_row(self.system.row(0), self.system.b()[0])?;
                let c2 = Halfspace::from_row(self.system.row(1), self.system.b()[1])?;
                dykstra_two_set(x, &c1, &c2, &self.config)
            }
            Algorithm::Simultaneous => {
                Ok(self.prepared.run(self.system, x, &self.config, cad::Averaging::Simultaneous))
            }
            Algorithm::CadRaw | Algorithm::CadScaled => {
                Ok(self.prepared.run(self.system, x, &self.config, cad::Averaging::Component))
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum ScaleRule {
    Unit,
    SqrtDegree,
}

pub(crate) fn check_dimension(system: &SparseConstraintSystem, x: &[f64]) -> Result<(), ProjectionError> {
    if x.len() != system.n() {
        return Err(ProjectionError::Dimension {
            expected: system.n(),
            found: x.len(),
        });
    }
    Ok(())
}
