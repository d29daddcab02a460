//! Component-averaged and simultaneous Dykstra on sparse halfspace systems.
//!
//! Both iterations keep one correction per stored entry of `A`, so the
//! correction `p_i` of constraint `i` lives exactly on `N_i`. One step:
//!
//! ```text
//! z   = x[cols] + p                          (per entry)
//! s   = min(b - scatter(rows, A·z), 0)       (per row, unit rows)
//! p   = -A · s[rows]
//! x   = scatter(cols, z - p) / l             (component averaging)
//! x   = (scatter(cols, z - p) + (m - l)·x)/m (simultaneous averaging)
//! ```
//!
//! The column-scaled variant multiplies the entries by `√w[col]` before row
//! normalization and runs the loop on `x / √w`; with `w = l` the iterates
//! converge to the orthogonal projection.

use rayon::prelude::*;

use crate::error::ProjectionError;
use crate::partition::ConstraintPartition;
use crate::scatter::scatter_into;
use crate::system::SparseConstraintSystem;

use super::two_set::distance;
use super::{check_dimension, ProjectionResult, ScaleRule, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Averaging {
    Component,
    Simultaneous,
}

/// Dykstra corrections `p_i`, one sparse vector per constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionState {
    /// `(support, values)` of every `p_i`, in the state's local indexing.
    pub corrections: Vec<(Vec<usize>, Vec<f64>)>,
}

impl CorrectionState {
    /// Whether every `p_i` vanishes outside `N_i` of the given system.
    pub fn supported_on(&self, system: &SparseConstraintSystem) -> bool {
        self.corrections.len() == system.m()
            && self.corrections.iter().enumerate().all(|(i, (cols, vals))| {
                let support = system.support(i);
                cols.iter()
                    .zip(vals)
                    .all(|(j, v)| *v == 0.0 || support.binary_search(j).is_ok())
            })
    }
}

/// Iteration state for one system. Exposed for step-by-step inspection;
/// the solver entry points drive it per component.
#[derive(Debug, Clone)]
pub struct CadState {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
    /// working residual × check_scale = residual on unit rows in original coordinates
    check_scale: Vec<f64>,
    col_scale: Vec<f64>,
    degree: Vec<f64>,
    m: f64,
    averaging: Averaging,
    input: Vec<f64>,
    x0: Vec<f64>,
    x: Vec<f64>,
    p: Vec<f64>,
    z: Vec<f64>,
    row_acc: Vec<f64>,
    col_acc: Vec<f64>,
    iterations: usize,
    last_distance: f64,
    distance_decreases: usize,
}

impl CadState {
    /// CAD on `system` with column weights `w` (entries scaled by `√w`).
    ///
    /// `w = 1` converges to the `l`-weighted projection, `w = l` to the
    /// orthogonal one.
    pub fn new(system: &SparseConstraintSystem, x: &[f64], column_weights: &[f64]) -> Self {
        let scale: Vec<f64> = column_weights.iter().map(|w| w.sqrt()).collect();
        Self::build(system, x, scale, Averaging::Component)
    }

    /// Simultaneous Dykstra on `system`.
    pub fn simultaneous(system: &SparseConstraintSystem, x: &[f64]) -> Self {
        Self::build(system, x, vec![1.0; system.n()], Averaging::Simultaneous)
    }

    fn build(system: &SparseConstraintSystem, x: &[f64], col_scale: Vec<f64>, averaging: Averaging) -> Self {
        let rows = system.entry_rows().to_vec();
        let cols = system.entry_cols().to_vec();
        let mut vals: Vec<f64> = system
            .entry_values()
            .iter()
            .zip(&cols)
            .map(|(a, &j)| a * col_scale[j])
            .collect();
        let mut scaled_norm = vec![0.0; system.m()];
        for (&i, &v) in rows.iter().zip(&vals) {
            scaled_norm[i] += v * v;
        }
        scaled_norm.iter_mut().for_each(|v| *v = v.sqrt());
        for (v, &i) in vals.iter_mut().zip(&rows) {
            *v /= scaled_norm[i];
        }
        let b = system.b().iter().zip(&scaled_norm).map(|(b, s)| b / s).collect();
        let check_scale = scaled_norm
            .iter()
            .zip(system.row_norms())
            .map(|(s, r)| s / r)
            .collect();
        let input = x.to_vec();
        let x: Vec<f64> = x.iter().zip(&col_scale).map(|(v, s)| v / s).collect();
        Self {
            input,
            p: vec![0.0; vals.len()],
            z: vec![0.0; vals.len()],
            row_acc: vec![0.0; system.m()],
            col_acc: vec![0.0; system.n()],
            degree: system.var_degrees().iter().map(|&l| l as f64).collect(),
            m: system.m() as f64,
            rows,
            cols,
            vals,
            b,
            check_scale,
            col_scale,
            averaging,
            x0: x.clone(),
            x,
            iterations: 0,
            last_distance: 0.0,
            distance_decreases: 0,
        }
    }

    /// One Dykstra sweep.
    pub fn step(&mut self) {
        for e in 0..self.vals.len() {
            self.z[e] = self.x[self.cols[e]] + self.p[e];
        }
        for e in 0..self.vals.len() {
            // reuse p as scratch for A·z terms
            self.p[e] = self.vals[e] * self.z[e];
        }
        scatter_into(&mut self.row_acc, &self.rows, &self.p);
        for e in 0..self.vals.len() {
            let i = self.rows[e];
            let s = (self.b[i] - self.row_acc[i]).min(0.0);
            self.p[e] = -self.vals[e] * s;
            // z becomes P_{C_i}(z) on its support
            self.z[e] -= self.p[e];
        }
        scatter_into(&mut self.col_acc, &self.cols, &self.z);
        match self.averaging {
            Averaging::Component => {
                for j in 0..self.x.len() {
                    if self.degree[j] > 0.0 {
                        self.x[j] = self.col_acc[j] / self.degree[j];
                    }
                }
            }
            Averaging::Simultaneous => {
                for j in 0..self.x.len() {
                    self.x[j] = (self.col_acc[j] + (self.m - self.degree[j]) * self.x[j]) / self.m;
                }
            }
        }
        self.iterations += 1;

        let d = distance(&self.x0, &self.x);
        if d < self.last_distance * (1.0 - 1e-12) - 1e-15 {
            self.distance_decreases += 1;
            log::debug!(
                "dykstra: distance to start decreased at iteration {} ({} -> {})",
                self.iterations,
                self.last_distance,
                d
            );
        }
        self.last_distance = d;
    }

    /// Normalized violation of the current iterate.
    pub fn violation(&mut self) -> f64 {
        for e in 0..self.vals.len() {
            self.z[e] = self.vals[e] * self.x[self.cols[e]];
        }
        scatter_into(&mut self.row_acc, &self.rows, &self.z);
        self.row_acc
            .iter()
            .zip(&self.b)
            .zip(&self.check_scale)
            .map(|((ax, b), s)| (ax - b) * s)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Iterates until feasible to `epsilon` or the cap is hit.
    /// Returns `(converged, violation)`.
    pub fn run(&mut self, epsilon: f64, max_iterations: usize) -> (bool, f64) {
        loop {
            let v = self.violation();
            if v <= epsilon {
                return (true, v);
            }
            if self.iterations >= max_iterations {
                return (false, v);
            }
            self.step();
        }
    }

    /// Current iterate in original coordinates; the exact input before the
    /// first step.
    pub fn point(&self) -> Vec<f64> {
        if self.iterations == 0 {
            return self.input.clone();
        }
        self.x.iter().zip(&self.col_scale).map(|(v, s)| v * s).collect()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn distance_decreases(&self) -> usize {
        self.distance_decreases
    }

    pub fn corrections(&self) -> CorrectionState {
        let m = self.b.len();
        let mut corrections = vec![(Vec::new(), Vec::new()); m];
        for e in 0..self.vals.len() {
            let (cols, vals) = &mut corrections[self.rows[e]];
            cols.push(self.cols[e]);
            vals.push(self.p[e]);
        }
        CorrectionState { corrections }
    }
}

#[derive(Debug, Clone)]
struct PreparedComponent {
    system: SparseConstraintSystem,
    vars: Vec<usize>,
    weights: Vec<f64>,
}

/// Per-component subsystems, restricted once and reused across calls.
#[derive(Debug, Clone, Default)]
pub(crate) struct PreparedComponents {
    components: Vec<PreparedComponent>,
}

impl PreparedComponents {
    pub(crate) fn new(system: &SparseConstraintSystem, partition: &ConstraintPartition, rule: ScaleRule) -> Self {
        let weights: Vec<f64> = match rule {
            ScaleRule::Unit => vec![1.0; system.n()],
            ScaleRule::SqrtDegree => system.var_degrees().iter().map(|&l| l as f64).collect(),
        };
        Self::with_weights(system, partition, &weights)
    }

    fn with_weights(system: &SparseConstraintSystem, partition: &ConstraintPartition, weights: &[f64]) -> Self {
        let components = partition
            .components
            .iter()
            .map(|constraints| {
                let (sub, vars) = system.restrict(constraints);
                let weights = vars.iter().map(|&j| weights[j]).collect();
                PreparedComponent {
                    system: sub,
                    vars,
                    weights,
                }
            })
            .collect();
        Self { components }
    }

    pub(crate) fn run(
        &self,
        system: &SparseConstraintSystem,
        x: &[f64],
        config: &SolverConfig,
        averaging: Averaging,
    ) -> ProjectionResult {
        let solve = |c: &PreparedComponent| {
            let local: Vec<f64> = c.vars.iter().map(|&j| x[j]).collect();
            let mut state = match averaging {
                Averaging::Component => CadState::new(&c.system, &local, &c.weights),
                Averaging::Simultaneous => CadState::simultaneous(&c.system, &local),
            };
            let (converged, violation) = state.run(config.epsilon, config.max_iterations);
            (state.point(), state.iterations(), converged, violation, state.distance_decreases())
        };
        let outcomes: Vec<_> = if config.parallel {
            self.components.par_iter().map(solve).collect()
        } else {
            self.components.iter().map(solve).collect()
        };

        let mut point = x.to_vec();
        let mut iterations = Vec::with_capacity(outcomes.len());
        let mut converged = Vec::with_capacity(outcomes.len());
        let mut component_violations = Vec::with_capacity(outcomes.len());
        let mut distance_decreases = 0;
        for (c, (local, iters, conv, viol, dec)) in self.components.iter().zip(outcomes) {
            for (&j, v) in c.vars.iter().zip(local) {
                point[j] = v;
            }
            iterations.push(iters);
            converged.push(conv);
            component_violations.push(viol);
            distance_decreases += dec;
        }
        let violation = system.max_normalized_violation(&point);
        let dual = x.iter().zip(&point).map(|(a, b)| a - b).collect();
        ProjectionResult {
            point,
            iterations,
            converged,
            component_violations,
            violation,
            dual,
            distance_decreases,
        }
    }
}

fn check_inputs(
    x: &[f64],
    system: &SparseConstraintSystem,
    partition: Option<&ConstraintPartition>,
    config: &SolverConfig,
) -> Result<(), ProjectionError> {
    config.check()?;
    if !system.is_valid() {
        return Err(ProjectionError::InvalidSystem);
    }
    check_dimension(system, x)?;
    if let Some(p) = partition {
        if !p.matches(system) {
            return Err(ProjectionError::PartitionMismatch);
        }
    }
    Ok(())
}

/// Simultaneous Dykstra over all `m` constraints at once.
pub fn dykstra_simultaneous(
    x: &[f64],
    system: &SparseConstraintSystem,
    config: &SolverConfig,
) -> Result<ProjectionResult, ProjectionError> {
    check_inputs(x, system, None, config)?;
    let trivial = ConstraintPartition::trivial(system);
    let prepared = PreparedComponents::new(system, &trivial, ScaleRule::Unit);
    Ok(prepared.run(system, x, config, Averaging::Simultaneous))
}

/// Plain CAD. Converges to `argmin_{y∈C} Σ l_j (y_j - x_j)²`.
pub fn cad_raw(
    x: &[f64],
    system: &SparseConstraintSystem,
    partition: &ConstraintPartition,
    config: &SolverConfig,
) -> Result<ProjectionResult, ProjectionError> {
    cad_with_column_scaling(x, system, partition, config, &vec![1.0; system.n()])
}

/// CAD in `1/√l`-scaled coordinates. Converges to the orthogonal projection.
pub fn cad_scaled(
    x: &[f64],
    system: &SparseConstraintSystem,
    partition: &ConstraintPartition,
    config: &SolverConfig,
) -> Result<ProjectionResult, ProjectionError> {
    let weights: Vec<f64> = system.var_degrees().iter().map(|&l| l as f64).collect();
    cad_with_column_scaling(x, system, partition, config, &weights)
}

/// CAD with arbitrary positive column weights `w`: entries are scaled by
/// `√w[col]` and the point by `1/√w`. The limit is
/// `argmin_{y∈C} Σ (l_j / w_j)(y_j - x_j)²`.
pub fn cad_with_column_scaling(
    x: &[f64],
    system: &SparseConstraintSystem,
    partition: &ConstraintPartition,
    config: &SolverConfig,
    column_weights: &[f64],
) -> Result<ProjectionResult, ProjectionError> {
    check_inputs(x, system, Some(partition), config)?;
    if column_weights.len() != system.n() {
        return Err(ProjectionError::Dimension {
            expected: system.n(),
            found: column_weights.len(),
        });
    }
    let touched_positive = system
        .var_degrees()
        .iter()
        .zip(column_weights)
        .all(|(&l, &w)| l == 0 || (w > 0.0 && w.is_finite()));
    if !touched_positive {
        return Err(ProjectionError::Config("column weights must be positive"));
    }
    let prepared = PreparedComponents::with_weights(system, partition, column_weights);
    Ok(prepared.run(system, x, config, Averaging::Component))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::partition;
    use crate::projection::Algorithm;

    fn cfg(eps: f64) -> SolverConfig {
        SolverConfig::new(Algorithm::CadScaled, eps)
    }

    fn diag_plus_bound() -> SparseConstraintSystem {
        // x1 + x2 <= 0, x1 <= 5; l = (2, 1)
        SparseConstraintSystem::new(2, [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)], vec![0.0, 5.0]).unwrap()
    }

    fn unit_box() -> SparseConstraintSystem {
        SparseConstraintSystem::new(
            2,
            [(0, 0, 1.0), (1, 0, -1.0), (2, 1, 1.0), (3, 1, -1.0)],
            vec![1.0, 0.0, 1.0, 0.0],
        )
        .unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(u, v)| (u - v).abs() <= tol)
    }

    #[test]
    fn raw_reaches_weighted_projection() {
        let s = diag_plus_bound();
        let r = cad_raw(&[1.0, 1.0], &s, &partition(&s), &cfg(1e-12)).unwrap();
        assert!(close(&r.point, &[1.0 / 3.0, -1.0 / 3.0], 1e-9), "{:?}", r.point);
    }

    #[test]
    fn scaled_reaches_orthogonal_projection() {
        let s = diag_plus_bound();
        let r = cad_scaled(&[1.0, 1.0], &s, &partition(&s), &cfg(1e-12)).unwrap();
        assert!(close(&r.point, &[0.0, 0.0], 1e-9), "{:?}", r.point);
        assert!(r.violation <= 1e-12);
    }

    #[test]
    fn feasible_input_is_untouched() {
        let s = diag_plus_bound();
        for f in [cad_raw, cad_scaled] {
            let r = f(&[-1.0, -1.0], &s, &partition(&s), &cfg(1e-10)).unwrap();
            assert_eq!(r.point, vec![-1.0, -1.0]);
            assert_eq!(r.max_iterations(), 0);
        }
    }

    #[test]
    fn box_scaling_cancels() {
        let s = unit_box();
        assert_eq!(s.var_degrees(), &[2, 2]);
        let r = cad_scaled(&[2.0, 2.0], &s, &partition(&s), &cfg(1e-12)).unwrap();
        assert!(close(&r.point, &[1.0, 1.0], 1e-9), "{:?}", r.point);
        let r = dykstra_simultaneous(&[2.0, 2.0], &s, &cfg(1e-12)).unwrap();
        assert!(close(&r.point, &[1.0, 1.0], 1e-9), "{:?}", r.point);
    }

    #[test]
    fn simultaneous_single_constraint() {
        let s = SparseConstraintSystem::new(2, [(0, 0, 1.0)], vec![1.0]).unwrap();
        let r = dykstra_simultaneous(&[2.0, 5.0], &s, &cfg(1e-12)).unwrap();
        assert_eq!(r.point, vec![1.0, 5.0]);
    }

    #[test]
    fn unconstrained_coordinates_pass_through() {
        let s = SparseConstraintSystem::new(3, [(0, 1, 1.0)], vec![0.0]).unwrap();
        let x = [7.0, 3.0, -2.0];
        let r = cad_scaled(&x, &s, &partition(&s), &cfg(1e-12)).unwrap();
        assert_eq!(r.point, vec![7.0, 0.0, -2.0]);
        let r = dykstra_simultaneous(&x, &s, &cfg(1e-12)).unwrap();
        assert_eq!(r.point, vec![7.0, 0.0, -2.0]);
    }

    #[test]
    fn corrections_stay_on_support() {
        let s = SparseConstraintSystem::new(
            4,
            [(0, 0, 1.0), (0, 1, 2.0), (1, 1, -1.0), (1, 2, 1.0), (2, 3, 1.0), (2, 0, 0.5)],
            vec![-1.0, -2.0, 0.5],
        )
        .unwrap();
        let w: Vec<f64> = s.var_degrees().iter().map(|&l| l as f64).collect();
        let mut st = CadState::new(&s, &[3.0, 1.0, 2.0, 4.0], &w);
        for _ in 0..25 {
            st.step();
            assert!(st.corrections().supported_on(&s));
        }
    }

    #[test]
    fn cap_flags_only_the_hard_component() {
        // component 0 infeasible (x <= -1, -x <= 0), component 1 easy
        let s = SparseConstraintSystem::new(2, [(0, 0, 1.0), (1, 0, -1.0), (2, 1, 1.0)], vec![-1.0, 0.0, 0.0])
            .unwrap();
        let c = cfg(1e-9).with_max_iterations(200);
        let r = cad_scaled(&[0.5, 3.0], &s, &partition(&s), &c).unwrap();
        assert_eq!(r.converged, vec![false, true]);
        assert_eq!(r.iterations[0], 200);
        assert_eq!(r.point[1], 0.0);
    }

    #[test]
    fn wrong_dimension_and_partition() {
        let s = diag_plus_bound();
        let p = partition(&s);
        assert!(matches!(
            cad_scaled(&[1.0], &s, &p, &cfg(1e-6)),
            Err(ProjectionError::Dimension { .. })
        ));
        let other = unit_box();
        assert_eq!(
            cad_scaled(&[1.0, 1.0], &s, &partition(&other), &cfg(1e-6)),
            Err(ProjectionError::PartitionMismatch)
        );
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let pairs: Vec<(usize, usize, f64)> = (0..20)
            .flat_map(|k| [(k, k, 1.0 + k as f64 * 0.1), (k, (k + 1) % 40, -0.7)])
            .collect();
        let b: Vec<f64> = (0..20).map(|k| -0.3 + 0.05 * k as f64).collect();
        let s = SparseConstraintSystem::new(40, pairs, b).unwrap();
        let p = partition(&s);
        let x: Vec<f64> = (0..40).map(|j| ((j * 7919) % 13) as f64 / 3.0).collect();
        let a = cad_scaled(&x, &s, &p, &cfg(1e-9)).unwrap();
        let b = cad_scaled(&x, &s, &p, &cfg(1e-9).with_parallel(true)).unwrap();
        assert_eq!(a, b);
    }
}
