use crate::error::ProjectionError;
use crate::system::SparseRow;

use super::{ProjectionResult, SolverConfig};

/// A closed convex set with a projection and a feasibility measure.
pub trait ConvexSet {
    fn project(&self, x: &[f64]) -> Vec<f64>;

    /// Distance-like violation; `<= 0` inside the set.
    fn violation(&self, x: &[f64]) -> f64;
}

impl<T: ConvexSet + ?Sized> ConvexSet for &T {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        (**self).project(x)
    }

    fn violation(&self, x: &[f64]) -> f64 {
        (**self).violation(x)
    }
}

/// `{x : a·x <= b}` with a sparse normal.
#[derive(Debug, Clone)]
pub struct Halfspace {
    cols: Vec<usize>,
    normal: Vec<f64>,
    b: f64,
}

impl Halfspace {
    pub fn from_row(row: SparseRow<'_>, b: f64) -> Result<Self, ProjectionError> {
        let norm = row.norm();
        if norm == 0.0 {
            return Err(ProjectionError::ZeroNormRow);
        }
        Ok(Self {
            cols: row.cols.to_vec(),
            normal: row.values.iter().map(|a| a / norm).collect(),
            b: b / norm,
        })
    }

    pub fn dense(a: &[f64], b: f64) -> Result<Self, ProjectionError> {
        let (cols, values): (Vec<_>, Vec<_>) =
            a.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j, v)).unzip();
        Self::from_row(SparseRow { cols: &cols, values: &values }, b)
    }

    fn dot(&self, x: &[f64]) -> f64 {
        self.cols.iter().zip(&self.normal).map(|(&j, &a)| a * x[j]).sum()
    }
}

impl ConvexSet for Halfspace {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        let step = (self.b - self.dot(x)).min(0.0);
        let mut out = x.to_vec();
        for (&j, &a) in self.cols.iter().zip(&self.normal) {
            out[j] += step * a;
        }
        out
    }

    fn violation(&self, x: &[f64]) -> f64 {
        self.dot(x) - self.b
    }
}

/// `{x : a·x = b}` with a dense normal.
#[derive(Debug, Clone)]
pub struct Hyperplane {
    normal: Vec<f64>,
    b: f64,
}

impl Hyperplane {
    pub fn new(a: &[f64], b: f64) -> Result<Self, ProjectionError> {
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(ProjectionError::ZeroNormRow);
        }
        Ok(Self {
            normal: a.iter().map(|v| v / norm).collect(),
            b: b / norm,
        })
    }

    fn dot(&self, x: &[f64]) -> f64 {
        self.normal.iter().zip(x).map(|(a, v)| a * v).sum()
    }
}

impl ConvexSet for Hyperplane {
    fn project(&self, x: &[f64]) -> Vec<f64> {
        let step = self.b - self.dot(x);
        x.iter().zip(&self.normal).map(|(v, a)| v + step * a).collect()
    }

    fn violation(&self, x: &[f64]) -> f64 {
        (self.dot(x) - self.b).abs()
    }
}

/// Two-set Dykstra:
///
/// ```text
/// y_k     = P1(x_k + p_k)
/// p_{k+1} = x_k + p_k - y_k
/// x_{k+1} = P2(y_k + q_k)
/// q_{k+1} = y_k + q_k - x_{k+1}
/// ```
///
/// starting from `x_1 = x`, `p_1 = q_1 = 0`. After every full pass the run
/// stops once the iterate is feasible to `ε` and moved by at most `ε`
/// (max norm). A feasible iterate alone is not enough: alternating steps
/// can enter the intersection well before reaching the projection. A point
/// already in both sets takes one iteration.
pub fn dykstra_two_set<A: ConvexSet, B: ConvexSet>(
    x: &[f64],
    first: &A,
    second: &B,
    config: &SolverConfig,
) -> Result<ProjectionResult, ProjectionError> {
    config.check()?;
    let n = x.len();
    let mut xk = x.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut buf = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut last_distance = 0.0;
    let mut distance_decreases = 0;
    let mut violation = f64::INFINITY;

    while iterations < config.max_iterations {
        for j in 0..n {
            buf[j] = xk[j] + p[j];
        }
        let y = first.project(&buf);
        for j in 0..n {
            p[j] = buf[j] - y[j];
            buf[j] = y[j] + q[j];
        }
        let next = second.project(&buf);
        let mut change = 0.0f64;
        for j in 0..n {
            q[j] = buf[j] - next[j];
            change = change.max((next[j] - xk[j]).abs());
        }
        xk = next;
        iterations += 1;

        let distance = distance(x, &xk);
        if distance < last_distance * (1.0 - 1e-12) - 1e-15 {
            distance_decreases += 1;
            log::debug!("two-set dykstra: distance decreased at iteration {iterations}");
        }
        last_distance = distance;

        violation = first.violation(&xk).max(second.violation(&xk));
        if violation <= config.epsilon && change <= config.epsilon {
            converged = true;
            break;
        }
    }

    let dual = x.iter().zip(&xk).map(|(a, b)| a - b).collect();
    Ok(ProjectionResult {
        point: xk,
        iterations: vec![iterations],
        converged: vec![converged],
        component_violations: vec![violation],
        violation,
        dual,
        distance_decreases,
    })
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::Algorithm;

    fn cfg(eps: f64) -> SolverConfig {
        SolverConfig::new(Algorithm::TwoSet, eps)
    }

    #[test]
    fn orthant_corner() {
        let c1 = Halfspace::dense(&[1.0, 0.0], 0.0).unwrap();
        let c2 = Halfspace::dense(&[0.0, 1.0], 0.0).unwrap();
        let r = dykstra_two_set(&[1.0, 1.0], &c1, &c2, &cfg(1e-12)).unwrap();
        assert_eq!(r.point, vec![0.0, 0.0]);
        assert!(r.all_converged());
    }

    #[test]
    fn feasible_point_is_fixed_in_one_iteration() {
        let c1 = Halfspace::dense(&[1.0, 0.0], 0.0).unwrap();
        let c2 = Halfspace::dense(&[0.0, 1.0], 0.0).unwrap();
        let r = dykstra_two_set(&[-1.0, -2.0], &c1, &c2, &cfg(1e-12)).unwrap();
        assert_eq!(r.point, vec![-1.0, -2.0]);
        assert_eq!(r.iterations, vec![1]);
        assert_eq!(r.dual, vec![0.0, 0.0]);
    }

    #[test]
    fn hyperplane_and_halfspace() {
        // {x1 + x2 = 0} ∩ {x1 >= 1} -> (1, -1) from the origin region
        let h = Hyperplane::new(&[1.0, 1.0], 0.0).unwrap();
        let c = Halfspace::dense(&[-1.0, 0.0], -1.0).unwrap();
        let r = dykstra_two_set(&[0.0, 0.0], &h, &c, &cfg(1e-13)).unwrap();
        assert!((r.point[0] - 1.0).abs() < 1e-9 && (r.point[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn iteration_cap_flags_unconverged() {
        // disjoint sets never satisfy both
        let c1 = Halfspace::dense(&[1.0], 0.0).unwrap();
        let c2 = Halfspace::dense(&[-1.0], -1.0).unwrap();
        let r = dykstra_two_set(&[3.0], &c1, &c2, &cfg(1e-9).with_max_iterations(50)).unwrap();
        assert_eq!(r.iterations, vec![50]);
        assert!(!r.all_converged());
    }
}
