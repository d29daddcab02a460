use thiserror::Error;

use crate::system::ValidationReport;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("right-hand side has length {found}, expected {expected}")]
    RhsLength { expected: usize, found: usize },
    #[error("row index {row} out of range for {m} constraints")]
    RowOutOfRange { row: usize, m: usize },
    #[error("column index {col} out of range for {n} variables")]
    ColumnOutOfRange { col: usize, n: usize },
    #[error("invalid constraint system: {}", .0.findings().join(", "))]
    Invalid(ValidationReport),
    #[error("cannot concatenate an empty list of systems")]
    EmptyBatch,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScatterError {
    #[error("index {index} at position {position} is out of range for size {size}")]
    IndexOutOfRange {
        position: usize,
        index: usize,
        size: usize,
    },
    #[error("{indices} indices but {values} values")]
    LengthMismatch { indices: usize, values: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("constraint row has zero norm")]
    ZeroNormRow,
    #[error("point has {found} coordinates, system has {expected} variables")]
    Dimension { expected: usize, found: usize },
    #[error("constraint system failed validation")]
    InvalidSystem,
    #[error("partition does not belong to this system")]
    PartitionMismatch,
    #[error("two-set Dykstra needs exactly two constraints, got {0}")]
    NotTwoSets(usize),
    #[error("invalid solver configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Error, PartialEq)]
pub enum GradientError {
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("projection did not converge")]
    NotConverged,
    #[error("active set is ambiguous at constraint {constraint} (residual {residual:e})")]
    AmbiguousActiveSet { constraint: usize, residual: f64 },
    #[error("finite-difference step must be positive")]
    BadStep,
}

#[derive(Debug, Error, PartialEq)]
pub enum SvcError {
    #[error("start point violates constraint {constraint} by {violation:e}")]
    InfeasiblePoint { constraint: usize, violation: f64 },
    #[error("point has {found} coordinates, expected {expected}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for enumeration ({m} constraints, limit {limit})")]
    TooLarge { m: usize, limit: usize },
    #[error("weights must be positive and finite")]
    BadWeights,
    #[error("no feasible KKT point found; the system is likely infeasible")]
    Infeasible,
    #[error("LP has no vertices")]
    NoVertex,
    #[error(transparent)]
    Svc(#[from] SvcError),
    #[error("could not find a bounded chord after {0} attempts")]
    UnboundedChord(usize),
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator configuration: {0}")]
    Config(String),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Error)]
pub enum DescentError {
    #[error("objective evaluated outside its domain at coordinate {0}")]
    Domain(usize),
    #[error("invalid descent configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Gradient(#[from] GradientError),
    #[error(transparent)]
    Svc(#[from] SvcError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("malformed instance: {0}")]
    Malformed(String),
}
