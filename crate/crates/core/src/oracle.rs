//! Brute-force ground truth for small instances.
//!
//! [`project_bruteforce`] enumerates every candidate active set `S`, solves
//! the equality-constrained weighted least-squares KKT system
//!
//! ```text
//! minimize Σ w_j (y_j - x_j)²   subject to   A_S y = b_S
//! ```
//!
//! in closed form and keeps the feasible, dual-nonnegative candidate with the
//! smallest objective. Dense algebra throughout; this is meant for `m <= 16`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::OracleError;
use crate::svc::{constraint_alpha, Alpha};
use crate::system::SparseConstraintSystem;

const MAX_ENUMERATED_ROWS: usize = 16;
const DUAL_TOLERANCE: f64 = 1e-9;
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub point: Vec<f64>,
    /// Active constraints, ascending.
    pub active_set: Vec<usize>,
    /// Multipliers `λ_i >= 0` of the active constraints (same order).
    pub multipliers: Vec<f64>,
    pub weights: Vec<f64>,
}

impl OracleSolution {
    /// Largest KKT residual: stationarity, primal feasibility, dual
    /// nonnegativity and complementary slackness, for input `x`.
    pub fn kkt_residual(&self, x: &[f64], system: &SparseConstraintSystem) -> f64 {
        let mut station: Vec<f64> = self
            .point
            .iter()
            .zip(x)
            .zip(&self.weights)
            .map(|((y, x), w)| 2.0 * w * (y - x))
            .collect();
        let mut worst = 0.0f64;
        for (&i, &lambda) in self.active_set.iter().zip(&self.multipliers) {
            let row = system.row(i);
            for (&j, &a) in row.cols.iter().zip(row.values) {
                station[j] += lambda * a;
            }
            worst = worst.max(-lambda);
            worst = worst.max((lambda * (row.dot(&self.point) - system.b()[i])).abs());
        }
        let station = station.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst.max(station).max(feasibility(&self.point, system))
    }
}

/// `max_i (A_i x - b_i)` on the unnormalized rows; `-inf` without rows.
pub fn feasibility(x: &[f64], system: &SparseConstraintSystem) -> f64 {
    system.max_violation(x)
}

fn dense_a(system: &SparseConstraintSystem) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(system.m(), system.n());
    for (i, j, v) in system.triplets() {
        a[(i, j)] += v;
    }
    a
}

fn feasible_tolerance(system: &SparseConstraintSystem) -> f64 {
    1e-9 * (1.0 + system.b().iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Exact weighted projection by active-set enumeration.
pub fn project_bruteforce(
    x: &[f64],
    system: &SparseConstraintSystem,
    weights: &[f64],
) -> Result<OracleSolution, OracleError> {
    let (n, m) = (system.n(), system.m());
    if m > MAX_ENUMERATED_ROWS {
        return Err(OracleError::TooLarge {
            m,
            limit: MAX_ENUMERATED_ROWS,
        });
    }
    if weights.len() != n || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(OracleError::BadWeights);
    }
    let a = dense_a(system);
    let b = DVector::from_column_slice(system.b());
    let xv = DVector::from_column_slice(x);
    let winv = DVector::from_iterator(n, weights.iter().map(|w| 1.0 / w));
    let tol = feasible_tolerance(system);

    let mut best: Option<(f64, OracleSolution)> = None;
    for mask in 0u32..(1u32 << m) {
        let active: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        if active.len() > n {
            continue;
        }
        let Some((y, lambda)) = solve_active(&a, &b, &xv, &winv, &active) else {
            continue;
        };
        if lambda.iter().any(|&l| l < -DUAL_TOLERANCE) {
            continue;
        }
        let y: Vec<f64> = y.iter().copied().collect();
        if system.max_violation(&y) > tol {
            continue;
        }
        let objective: f64 = y
            .iter()
            .zip(x)
            .zip(weights)
            .map(|((y, x), w)| w * (y - x) * (y - x))
            .sum();
        // strictly better only: the lowest mask wins ties
        let better = match &best {
            None => true,
            Some((obj, _)) => objective < *obj - 1e-12 * (1.0 + obj.abs()),
        };
        if better {
            best = Some((
                objective,
                OracleSolution {
                    point: y,
                    active_set: active,
                    multipliers: lambda,
                    weights: weights.to_vec(),
                },
            ));
        }
    }
    best.map(|(_, s)| s).ok_or(OracleError::Infeasible)
}

/// `y = x - W⁻¹ A_Sᵀ μ` with `(A_S W⁻¹ A_Sᵀ) μ = A_S x - b_S`, `λ = 2μ`.
fn solve_active(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    winv: &DVector<f64>,
    active: &[usize],
) -> Option<(DVector<f64>, Vec<f64>)> {
    if active.is_empty() {
        return Some((x.clone(), Vec::new()));
    }
    let a_s = a.select_rows(active);
    let scaled = DMatrix::from_fn(a_s.nrows(), a_s.ncols(), |r, c| a_s[(r, c)] * winv[c]);
    let gram = &scaled * a_s.transpose();
    let sv = gram.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 || sv.min() <= RANK_TOLERANCE * smax {
        return None;
    }
    let rhs = &a_s * x - b.select_rows(active);
    let mu = gram.cholesky()?.solve(&rhs);
    let y = x - scaled.transpose() * &mu;
    Some((y, mu.iter().map(|v| 2.0 * v).collect()))
}

/// Maximizes `c·x` over `C` by enumerating all vertices (`n`-subsets of
/// rows). The caller guarantees the LP is bounded.
pub fn lp_vertex_optimum(
    c: &[f64],
    system: &SparseConstraintSystem,
) -> Result<(f64, Vec<f64>), OracleError> {
    let (n, m) = (system.n(), system.m());
    let a = dense_a(system);
    let b = DVector::from_column_slice(system.b());
    let tol = feasible_tolerance(system);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    if n > m {
        return Err(OracleError::NoVertex);
    }
    loop {
        let a_s = a.select_rows(&subset);
        if let Some(v) = a_s.lu().solve(&b.select_rows(&subset)) {
            let v: Vec<f64> = v.iter().copied().collect();
            if v.iter().all(|t| t.is_finite()) && system.max_violation(&v) <= tol {
                let value: f64 = c.iter().zip(&v).map(|(c, x)| c * x).sum();
                if best.as_ref().is_none_or(|(bv, _)| value > *bv) {
                    best = Some((value, v));
                }
            }
        }
        if !next_combination(&mut subset, m) {
            break;
        }
    }
    best.ok_or(OracleError::NoVertex)
}

fn next_combination(subset: &mut [usize], m: usize) -> bool {
    let k = subset.len();
    for pos in (0..k).rev() {
        if subset[pos] < m - k + pos {
            subset[pos] += 1;
            for q in pos + 1..k {
                subset[q] = subset[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

const CHORD_RETRIES: usize = 100;

/// Hit-and-run random walk inside `C`, starting from a feasible point.
///
/// Each step draws a uniform direction, computes the feasible chord through
/// the current point with the clipping factors in both directions and jumps
/// to a uniform point on it. Directions with an unbounded chord are redrawn.
pub fn hit_and_run(
    system: &SparseConstraintSystem,
    start: &[f64],
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = start.to_vec();
    let tol = 1e-9;
    for _ in 0..steps {
        let mut attempts = 0;
        loop {
            if attempts == CHORD_RETRIES {
                return Err(OracleError::UnboundedChord(CHORD_RETRIES));
            }
            attempts += 1;
            let mut v: Vec<f64> = (0..z.len()).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            v.iter_mut().for_each(|a| *a /= norm);
            let back: Vec<f64> = v.iter().map(|a| -a).collect();
            let mut forward = Alpha::Unbounded;
            let mut backward = Alpha::Unbounded;
            for i in 0..system.m() {
                let (row, bi) = (system.row(i), system.b()[i]);
                forward = forward.min(constraint_alpha(&z, &v, row, bi, tol).map_err(|e| {
                    OracleError::Svc(e.at_constraint(i))
                })?);
                backward = backward.min(constraint_alpha(&z, &back, row, bi, tol).map_err(|e| {
                    OracleError::Svc(e.at_constraint(i))
                })?);
            }
            let (Alpha::Finite(hi), Alpha::Finite(lo)) = (forward, backward) else {
                continue;
            };
            let t = -lo + (hi + lo) * rng.random::<f64>();
            for (zj, vj) in z.iter_mut().zip(&v) {
                *zj += t * vj;
            }
            break;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_plus_bound() -> SparseConstraintSystem {
        SparseConstraintSystem::new(2, [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)], vec![0.0, 5.0]).unwrap()
    }

    #[test]
    fn orthogonal_line_projection() {
        let s = diag_plus_bound();
        let sol = project_bruteforce(&[1.0, 1.0], &s, &[1.0, 1.0]).unwrap();
        assert!(sol.point.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(sol.active_set, vec![0]);
        assert!(sol.kkt_residual(&[1.0, 1.0], &s) < 1e-9);
    }

    #[test]
    fn weighted_projection_by_hand() {
        // 4(y1-1)+λ=0, 2(y2-1)+λ=0, y1+y2=0 ⇒ λ=8/3, y=(1/3,-1/3)
        let s = diag_plus_bound();
        let sol = project_bruteforce(&[1.0, 1.0], &s, &[2.0, 1.0]).unwrap();
        assert!((sol.point[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((sol.point[1] + 1.0 / 3.0).abs() < 1e-12);
        assert!((sol.multipliers[0] - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn feasible_point_has_empty_active_set() {
        let s = diag_plus_bound();
        let sol = project_bruteforce(&[-1.0, 0.5], &s, &[1.0, 1.0]).unwrap();
        assert_eq!(sol.point, vec![-1.0, 0.5]);
        assert!(sol.active_set.is_empty());
    }

    #[test]
    fn infeasible_and_bad_inputs() {
        let s = SparseConstraintSystem::new(1, [(0, 0, 1.0), (1, 0, -1.0)], vec![-1.0, 0.0]).unwrap();
        assert_eq!(project_bruteforce(&[0.0], &s, &[1.0]), Err(OracleError::Infeasible));
        assert_eq!(project_bruteforce(&[0.0], &s, &[0.0]), Err(OracleError::BadWeights));
    }

    #[test]
    fn feasibility_examples() {
        let s = SparseConstraintSystem::new(2, [(0, 0, 1.0)], vec![1.0]).unwrap();
        assert_eq!(feasibility(&[0.0, 0.0], &s), -1.0);
        assert_eq!(feasibility(&[2.0, 0.0], &s), 1.0);
    }

    #[test]
    fn lp_on_unit_square() {
        let s = SparseConstraintSystem::new(
            2,
            [(0, 0, 1.0), (1, 0, -1.0), (2, 1, 1.0), (3, 1, -1.0)],
            vec![1.0, 0.0, 1.0, 0.0],
        )
        .unwrap();
        let (v, x) = lp_vertex_optimum(&[1.0, -2.0], &s).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(x, vec![1.0, 0.0]);
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut s = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut s, 5) {
            count += 1;
        }
        assert_eq!(count, 10);
    }

    #[test]
    fn hit_and_run_zero_steps() {
        let s = diag_plus_bound();
        assert_eq!(hit_and_run(&s, &[-1.0, -1.0], 0, 3).unwrap(), vec![-1.0, -1.0]);
    }

    #[test]
    fn hit_and_run_rejects_infeasible_start() {
        let s = diag_plus_bound();
        assert!(matches!(hit_and_run(&s, &[1.0, 1.0], 1, 3), Err(OracleError::Svc(_))));
    }
}
