//! Jacobians of the projection `P_C`.
//!
//! Outside `C` the projection moves `x` along the unit direction
//! `d = (x - P_C(x)) / ‖x - P_C(x)‖`. The exact Jacobian projects onto
//! `T ∩ H`, where `T` is the tangent cone of `C` at `P_C(x)` and
//! `H = {w : ⟨d, w⟩ = 0}`; it can have any rank down to zero. The surrogate
//! keeps only `H`:
//!
//! ```text
//! P_H = I - d dᵀ    if x ∉ C
//! P_H = I           if x ∈ C
//! ```
//!
//! which always has rank `n - 1` or `n`.
//!
//! Where `P_C` is differentiable, `d` is a positive combination of the
//! active rows and `T ∩ H` is the null space of those rows. The exact
//! Jacobian is computed as that orthogonal projection in closed form.

use nalgebra::DMatrix;

use crate::error::GradientError;
use crate::projection::Projector;
use crate::system::SparseConstraintSystem;

/// Relative distance below which `x` counts as inside `C`.
pub const INSIDE_TOLERANCE: f64 = 1e-9;
/// Normalized slack at or below which a constraint is active.
pub const ACTIVE_TOLERANCE: f64 = 1e-7;
/// Normalized slack above which a constraint is clearly inactive.
pub const INACTIVE_TOLERANCE: f64 = 1e-5;

/// Multipliers (of `d` in terms of unit active rows) at or below this are
/// treated as zero.
pub const MULTIPLIER_TOLERANCE: f64 = 1e-9;

const RANK_TOLERANCE: f64 = 1e-6;
const BASIS_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianKind {
    Surrogate,
    Exact,
    FiniteDifference,
}

#[derive(Debug, Clone)]
enum Repr {
    Identity,
    /// `I - d dᵀ`.
    Hyperplane,
    /// `I - Q Qᵀ` for an orthonormal `n × r` basis `Q`.
    Complement(DMatrix<f64>),
    /// Column-major storage of a dense matrix.
    Dense(DMatrix<f64>),
}

/// A matrix-free linear operator standing in for `∂P_C(x)`.
#[derive(Debug, Clone)]
pub struct JacobianOperator {
    kind: JacobianKind,
    base_point: Vec<f64>,
    projected_point: Vec<f64>,
    direction: Option<Vec<f64>>,
    active_set: Vec<usize>,
    repr: Repr,
}

impl JacobianOperator {
    /// Surrogate Jacobian from a precomputed projection `y = P_C(x)`.
    pub fn surrogate_from_projection(x: &[f64], y: &[f64]) -> Self {
        let direction = unit_direction(x, y);
        let repr = if direction.is_some() {
            Repr::Hyperplane
        } else {
            Repr::Identity
        };
        Self {
            kind: JacobianKind::Surrogate,
            base_point: x.to_vec(),
            projected_point: y.to_vec(),
            direction,
            active_set: Vec::new(),
            repr,
        }
    }

    /// Exact Jacobian from a precomputed projection `y = P_C(x)`.
    ///
    /// With `strict`, three situations where `P_C` is not differentiable (or
    /// too close to such a point to tell) are reported as
    /// [`GradientError::AmbiguousActiveSet`]: a slack between the active and
    /// inactive thresholds, a feasible `x` on a facet, and an active row with
    /// a zero multiplier. Without it, rows are classified by the active
    /// threshold and rows with zero multipliers are dropped.
    pub fn exact_from_projection(
        x: &[f64],
        y: &[f64],
        system: &SparseConstraintSystem,
        strict: bool,
    ) -> Result<Self, GradientError> {
        let direction = unit_direction(x, y);
        let slack = |i: usize| (system.b()[i] - system.row(i).dot(y)) / system.row_norms()[i];
        let mut active_set = Vec::new();
        for i in 0..system.m() {
            let r = slack(i);
            if r <= ACTIVE_TOLERANCE {
                active_set.push(i);
            } else if strict && r <= INACTIVE_TOLERANCE {
                return Err(GradientError::AmbiguousActiveSet {
                    constraint: i,
                    residual: r,
                });
            }
        }
        let repr = match &direction {
            None => {
                if let (true, Some(&i)) = (strict, active_set.first()) {
                    return Err(GradientError::AmbiguousActiveSet {
                        constraint: i,
                        residual: slack(i),
                    });
                }
                Repr::Identity
            }
            Some(d) => {
                let n = x.len();
                let rows = DMatrix::from_fn(active_set.len(), n, |k, j| {
                    let i = active_set[k];
                    let row = system.row(i);
                    row.cols
                        .iter()
                        .position(|&c| c == j)
                        .map_or(0.0, |e| row.values[e] / system.row_norms()[i])
                });
                let multipliers = rows
                    .transpose()
                    .svd(true, true)
                    .solve(&DMatrix::from_column_slice(n, 1, d), BASIS_TOLERANCE)
                    .expect("both SVD factors were requested");
                let mut keep = Vec::with_capacity(active_set.len());
                for (k, &i) in active_set.iter().enumerate() {
                    let mu = multipliers[(k, 0)];
                    if mu > MULTIPLIER_TOLERANCE {
                        keep.push(k);
                    } else if strict {
                        return Err(GradientError::AmbiguousActiveSet {
                            constraint: i,
                            residual: mu,
                        });
                    }
                }
                if keep.is_empty() {
                    Repr::Hyperplane
                } else {
                    Repr::Complement(row_space_basis(&rows.select_rows(&keep)))
                }
            }
        };
        Ok(Self {
            kind: JacobianKind::Exact,
            base_point: x.to_vec(),
            projected_point: y.to_vec(),
            direction,
            active_set,
            repr,
        })
    }

    /// Wraps a dense `n × n` matrix given as rows.
    pub fn from_rows(x: &[f64], y: &[f64], rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self {
            kind: JacobianKind::FiniteDifference,
            base_point: x.to_vec(),
            projected_point: y.to_vec(),
            direction: unit_direction(x, y),
            active_set: Vec::new(),
            repr: Repr::Dense(matrix),
        }
    }

    pub fn kind(&self) -> JacobianKind {
        self.kind
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    pub fn projected_point(&self) -> &[f64] {
        &self.projected_point
    }

    /// Unit `d`, absent when `x` is inside `C`.
    pub fn direction(&self) -> Option<&[f64]> {
        self.direction.as_deref()
    }

    /// Active constraints at `P_C(x)` (only recorded for the exact kind).
    pub fn active_set(&self) -> &[usize] {
        &self.active_set
    }

    pub fn dim(&self) -> usize {
        self.base_point.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Identity => v.to_vec(),
            Repr::Hyperplane => {
                let d = self.direction.as_deref().expect("hyperplane operator has a direction");
                let t: f64 = d.iter().zip(v).map(|(a, b)| a * b).sum();
                v.iter().zip(d).map(|(vi, di)| vi - t * di).collect()
            }
            Repr::Complement(q) => {
                let coeffs = q.tr_mul(&DMatrix::from_column_slice(v.len(), 1, v));
                let proj = q * coeffs;
                v.iter().enumerate().map(|(i, vi)| vi - proj[(i, 0)]).collect()
            }
            Repr::Dense(m) => (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
                .collect(),
        }
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Dense(m) => (0..m.ncols())
                .map(|j| (0..m.nrows()).map(|i| m[(i, j)] * v[i]).sum())
                .collect(),
            _ => self.apply(v),
        }
    }

    /// Rows of the dense matrix; column `j` is `apply(e_j)`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let m = self.matrix();
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    }

    /// Singular values above `1e-6`.
    pub fn rank(&self) -> usize {
        self.matrix()
            .singular_values()
            .iter()
            .filter(|&&s| s > RANK_TOLERANCE)
            .count()
    }

    fn matrix(&self) -> DMatrix<f64> {
        if let Repr::Dense(m) = &self.repr {
            return m.clone();
        }
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            for (i, v) in self.apply(&e).into_iter().enumerate() {
                m[(i, j)] = v;
            }
            e[j] = 0.0;
        }
        m
    }
}

/// Orthonormal basis (as columns) of the span of the rows of `rows`.
fn row_space_basis(rows: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = rows.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > BASIS_TOLERANCE * smax.max(1.0))
        .collect();
    v_t.select_rows(&keep).transpose()
}

fn unit_direction(x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let dist = norm(&diff);
    let scale = 1.0 + norm(x);
    if dist <= INSIDE_TOLERANCE * scale {
        None
    } else {
        Some(diff.into_iter().map(|v| v / dist).collect())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn converged_projection(x: &[f64], projector: &Projector<'_>) -> Result<Vec<f64>, GradientError> {
    let r = projector.project(x)?;
    if !r.all_converged() {
        return Err(GradientError::NotConverged);
    }
    Ok(r.point)
}

/// `P_{H_x}` at `x`, using `projector` for `P_C(x)`.
pub fn surrogate_jacobian(x: &[f64], projector: &Projector<'_>) -> Result<JacobianOperator, GradientError> {
    let y = converged_projection(x, projector)?;
    Ok(JacobianOperator::surrogate_from_projection(x, &y))
}

/// `P_{T_x ∩ H_x}` at `x`. The projector should run at a tight tolerance
/// (around `1e-12`) so the active set can be read off `P_C(x)`.
pub fn exact_jacobian(x: &[f64], projector: &Projector<'_>) -> Result<JacobianOperator, GradientError> {
    let y = converged_projection(x, projector)?;
    JacobianOperator::exact_from_projection(x, &y, projector.system(), true)
}

/// Central differences; returns rows of the `n × n` matrix.
pub fn finite_difference_jacobian(
    x: &[f64],
    projector: &Projector<'_>,
    step: f64,
) -> Result<Vec<Vec<f64>>, GradientError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(GradientError::BadStep);
    }
    let n = x.len();
    let mut rows = vec![vec![0.0; n]; n];
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + step;
        let plus = converged_projection(&probe, projector)?;
        probe[j] = x[j] - step;
        let minus = converged_projection(&probe, projector)?;
        probe[j] = x[j];
        for i in 0..n {
            rows[i][j] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    Ok(rows)
}

/// `½‖w - P_C(w)‖²` and its gradient `w - P_C(w)`.
pub fn penalty(w: &[f64], projected: &[f64]) -> (f64, Vec<f64>) {
    let grad: Vec<f64> = w.iter().zip(projected).map(|(a, b)| a - b).collect();
    (0.5 * grad.iter().map(|g| g * g).sum::<f64>(), grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{Algorithm, SolverConfig};

    fn tight(system: &SparseConstraintSystem) -> Projector<'_> {
        Projector::new(
            system,
            SolverConfig::new(Algorithm::CadScaled, 1e-12).with_max_iterations(1_000_000),
        )
        .unwrap()
    }

    fn half_plane() -> SparseConstraintSystem {
        SparseConstraintSystem::new(2, [(0, 0, 1.0)], vec![1.0]).unwrap()
    }

    fn unit_square() -> SparseConstraintSystem {
        SparseConstraintSystem::new(
            2,
            [(0, 0, 1.0), (1, 1, 1.0), (2, 0, -1.0), (3, 1, -1.0)],
            vec![1.0, 1.0, 0.0, 0.0],
        )
        .unwrap()
    }

    fn close(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
        a.iter().flatten().zip(b.iter().flatten()).all(|(u, v)| (u - v).abs() <= tol)
    }

    #[test]
    fn surrogate_examples() {
        let s = half_plane();
        let p = tight(&s);
        let j = surrogate_jacobian(&[2.0, 0.0], &p).unwrap();
        assert_eq!(j.apply(&[3.0, 4.0]), vec![0.0, 4.0]);
        assert_eq!(j.rank(), 1);
        let j = surrogate_jacobian(&[0.0, 0.0], &p).unwrap();
        assert_eq!(j.apply(&[3.0, 4.0]), vec![3.0, 4.0]);
        assert_eq!(j.rank(), 2);
    }

    #[test]
    fn exact_single_active_matches_surrogate() {
        let s = half_plane();
        let p = tight(&s);
        let j = exact_jacobian(&[2.0, 0.0], &p).unwrap();
        assert!(close(&j.to_dense(), &[vec![0.0, 0.0], vec![0.0, 1.0]], 1e-10));
    }

    #[test]
    fn hypercube_corner_has_rank_zero() {
        let s = unit_square();
        let p = tight(&s);
        let j = exact_jacobian(&[2.0, 2.0], &p).unwrap();
        assert_eq!(j.active_set(), &[0, 1]);
        assert_eq!(j.rank(), 0);
        assert_eq!(surrogate_jacobian(&[2.0, 2.0], &p).unwrap().rank(), 1);
    }

    #[test]
    fn finite_differences() {
        let s = half_plane();
        let p = tight(&s);
        let fd = finite_difference_jacobian(&[2.0, 0.0], &p, 1e-6).unwrap();
        assert!(close(&fd, &[vec![0.0, 0.0], vec![0.0, 1.0]], 1e-6));
        let fd = finite_difference_jacobian(&[0.0, 0.0], &p, 1e-6).unwrap();
        assert!(close(&fd, &[vec![1.0, 0.0], vec![0.0, 1.0]], 1e-8));
        assert_eq!(
            finite_difference_jacobian(&[0.0, 0.0], &p, 0.0),
            Err(GradientError::BadStep)
        );
    }

    #[test]
    fn boundary_point_is_ambiguous_for_exact() {
        let s = half_plane();
        let p = tight(&s);
        assert!(matches!(
            exact_jacobian(&[1.0, 0.0], &p),
            Err(GradientError::AmbiguousActiveSet { constraint: 0, .. })
        ));
        // the surrogate follows the two-case formula literally
        assert_eq!(surrogate_jacobian(&[1.0, 0.0], &p).unwrap().rank(), 2);
    }

    #[test]
    fn near_active_slack_is_ambiguous() {
        let s = SparseConstraintSystem::new(2, [(0, 0, 1.0), (1, 1, 1.0)], vec![1.0, 1e-6]).unwrap();
        let p = tight(&s);
        assert!(matches!(
            exact_jacobian(&[2.0, 0.0], &p),
            Err(GradientError::AmbiguousActiveSet { constraint: 1, .. })
        ));
    }

    #[test]
    fn dense_wrapper_transposes() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let j = JacobianOperator::from_rows(&[0.0, 0.0], &[0.0, 0.0], &rows);
        assert_eq!(j.apply(&[1.0, 0.0]), vec![1.0, 3.0]);
        assert_eq!(j.apply_transpose(&[1.0, 0.0]), vec![1.0, 2.0]);
        assert_eq!(j.to_dense(), rows);
    }

    #[test]
    fn penalty_gradient() {
        let (v, g) = penalty(&[3.0, 1.0], &[1.0, 1.0]);
        assert_eq!(v, 2.0);
        assert_eq!(g, vec![2.0, 0.0]);
    }
}
