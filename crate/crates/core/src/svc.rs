//! Sparse vector clipping.
//!
//! Given a feasible `z` and a direction `v`, every constraint `i` allows a
//! step of at most `α_i = max{α >= 0 : z + αv ∈ C_i}`. Standard clipping
//! moves by `min(1, min_i α_i)·v`. Sparse clipping takes the minimum only
//! within each independent component `p`, so a tight constraint in one
//! component does not shrink the step of the others:
//!
//! ```text
//! y_j = z_j + min(1, α_p)·v_j     for every variable j of component p
//! ```
//!
//! Variables outside every component are unconstrained and move by `v_j`.

use std::cmp::Ordering;
use std::fmt;

use crate::error::SvcError;
use crate::partition::ConstraintPartition;
use crate::system::{SparseConstraintSystem, SparseRow};

/// A step-size bound that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Finite(f64),
    Unbounded,
}

impl Alpha {
    pub fn min(self, other: Alpha) -> Alpha {
        match (self, other) {
            (Alpha::Unbounded, a) | (a, Alpha::Unbounded) => a,
            (Alpha::Finite(a), Alpha::Finite(b)) => Alpha::Finite(a.min(b)),
        }
    }

    /// `min(1, α)`.
    pub fn capped(self) -> f64 {
        match self {
            Alpha::Unbounded => 1.0,
            Alpha::Finite(a) => a.min(1.0),
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Alpha::Unbounded)
    }
}

impl PartialOrd for Alpha {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Alpha::Unbounded, Alpha::Unbounded) => Some(Ordering::Equal),
            (Alpha::Unbounded, _) => Some(Ordering::Greater),
            (_, Alpha::Unbounded) => Some(Ordering::Less),
            (Alpha::Finite(a), Alpha::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Finite(a) => write!(f, "{a}"),
            Alpha::Unbounded => f.write_str("inf"),
        }
    }
}

impl SvcError {
    pub(crate) fn at_constraint(self, constraint: usize) -> Self {
        match self {
            SvcError::InfeasiblePoint { violation, .. } => SvcError::InfeasiblePoint {
                constraint,
                violation,
            },
            other => other,
        }
    }
}

/// Largest `α >= 0` with `A_i (z + αv) <= b_i`.
///
/// `tolerance` is the allowed violation of `z` itself, measured on the unit
/// row (the same units as the projection ε that produced `z`).
pub fn constraint_alpha(
    z: &[f64],
    v: &[f64],
    row: SparseRow<'_>,
    b: f64,
    tolerance: f64,
) -> Result<Alpha, SvcError> {
    let slack = b - row.dot(z);
    if slack < -tolerance * row.norm() {
        return Err(SvcError::InfeasiblePoint {
            constraint: 0,
            violation: -slack,
        });
    }
    let rate = row.dot(v);
    if rate > 0.0 {
        Ok(Alpha::Finite(slack.max(0.0) / rate))
    } else {
        Ok(Alpha::Unbounded)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipMode {
    Sparse,
    Standard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipReport {
    /// `α_i` of every constraint.
    pub alphas: Vec<Alpha>,
    /// `α_p = min_{i∈p} α_i` of every component.
    pub component_alphas: Vec<Alpha>,
    /// Constraints attaining `α_p`, per component (empty when unbounded).
    pub argmins: Vec<Vec<usize>>,
    /// `α_C = min_i α_i`.
    pub global_alpha: Alpha,
    pub output: Vec<f64>,
}

pub fn clip(
    z: &[f64],
    v: &[f64],
    system: &SparseConstraintSystem,
    partition: &ConstraintPartition,
    mode: ClipMode,
    tolerance: f64,
) -> Result<ClipReport, SvcError> {
    let n = system.n();
    for len in [z.len(), v.len()] {
        if len != n {
            return Err(SvcError::Dimension {
                expected: n,
                found: len,
            });
        }
    }
    let alphas = (0..system.m())
        .map(|i| {
            constraint_alpha(z, v, system.row(i), system.b()[i], tolerance).map_err(|e| e.at_constraint(i))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut component_alphas = Vec::with_capacity(partition.len());
    let mut argmins = Vec::with_capacity(partition.len());
    for constraints in &partition.components {
        let alpha = constraints
            .iter()
            .fold(Alpha::Unbounded, |acc, &i| acc.min(alphas[i]));
        let attaining = match alpha {
            Alpha::Unbounded => Vec::new(),
            a => constraints.iter().copied().filter(|&i| alphas[i] == a).collect(),
        };
        component_alphas.push(alpha);
        argmins.push(attaining);
    }
    let global_alpha = alphas.iter().fold(Alpha::Unbounded, |acc, &a| acc.min(a));

    let output = z
        .iter()
        .zip(v)
        .zip(&partition.variable_components)
        .map(|((zj, vj), comp)| {
            let t = match (comp, mode) {
                (None, _) => 1.0,
                (Some(p), ClipMode::Sparse) => component_alphas[*p].capped(),
                (Some(_), ClipMode::Standard) => global_alpha.capped(),
            };
            zj + t * vj
        })
        .collect();

    Ok(ClipReport {
        alphas,
        component_alphas,
        argmins,
        global_alpha,
        output,
    })
}

/// Applies sparse clipping once per direction, feeding each output into the
/// next layer.
pub fn clip_chain(
    z: &[f64],
    directions: &[Vec<f64>],
    system: &SparseConstraintSystem,
    partition: &ConstraintPartition,
    tolerance: f64,
) -> Result<Vec<f64>, SvcError> {
    let mut current = z.to_vec();
    for v in directions {
        current = clip(&current, v, system, partition, ClipMode::Sparse, tolerance)?.output;
    }
    Ok(current)
}
