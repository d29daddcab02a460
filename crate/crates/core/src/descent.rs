//! Gradient ascent through the projection.
//!
//! A free parameter point `w` is mapped to the feasible `y = P_C(w)` and
//! updated with
//!
//! ```text
//! w ← w + η_t (Jᵀ ∇f(y) - c_h (w - P_C(w)))
//! ```
//!
//! where `J` is the surrogate or the exact Jacobian of `P_C` at `w` and
//! `c_h` weighs the penalty `½‖w - P_C(w)‖²`. Optionally `y` is refined by a
//! few sparse clipping steps along `η ∇f`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::DescentError;
use crate::gradient::JacobianOperator;
use crate::partition::ConstraintPartition;
use crate::probgen::{gen_initial_point, Objective, ProblemInstance};
use crate::projection::{Algorithm, Projector, SolverConfig};
use crate::svc::{clip, ClipMode};

/// Power allocations below `-DOMAIN_TOLERANCE` are rejected.
pub const DOMAIN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GradientKind {
    Surrogate,
    Exact,
}

impl GradientKind {
    pub fn name(self) -> &'static str {
        match self {
            GradientKind::Surrogate => "surrogate",
            GradientKind::Exact => "exact",
        }
    }
}

impl fmt::Display for GradientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GradientKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "surrogate" => Ok(GradientKind::Surrogate),
            "exact" => Ok(GradientKind::Exact),
            other => Err(format!("unknown gradient kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig {
    pub gradient: GradientKind,
    pub eta: f64,
    pub iterations: usize,
    /// Penalty weight `c_h`.
    pub ch: f64,
    pub svc_steps: usize,
    /// Seed of the initial `w ~ U(-1, 1)`.
    pub seed: u64,
    /// Use `η / √t` instead of a fixed step.
    pub decay: bool,
    pub solver: SolverConfig,
}

impl DescentConfig {
    pub fn new(gradient: GradientKind, eta: f64, iterations: usize) -> Self {
        Self {
            gradient,
            eta,
            iterations,
            ch: 0.0,
            svc_steps: 0,
            seed: 0,
            decay: false,
            solver: SolverConfig::new(Algorithm::CadScaled, 1e-9),
        }
    }

    pub fn with_penalty(mut self, ch: f64) -> Self {
        self.ch = ch;
        self
    }

    pub fn with_svc_steps(mut self, steps: usize) -> Self {
        self.svc_steps = steps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_decay(mut self, decay: bool) -> Self {
        self.decay = decay;
        self
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }

    fn check(&self) -> Result<(), DescentError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(DescentError::Config("eta must be positive"));
        }
        if self.iterations == 0 {
            return Err(DescentError::Config("iterations must be at least 1"));
        }
        if !(self.ch >= 0.0 && self.ch.is_finite()) {
            return Err(DescentError::Config("penalty weight must be >= 0"));
        }
        if self.solver.algorithm == Algorithm::TwoSet {
            return Err(DescentError::Config("descent needs a multi-constraint projection"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// `f(y)` at the reported feasible point.
    pub objective: f64,
    /// `max(0, max_i (A_i y - b_i)/‖A_i‖)`.
    pub violation: f64,
    /// `‖w - P_C(w)‖`.
    pub dual_norm: f64,
    /// Largest per-component CAD iteration count of this step.
    pub cad_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    /// Set when a projection hit its iteration cap and the run stopped early.
    pub truncated: bool,
    /// Last reported feasible point.
    pub point: Vec<f64>,
    /// Last parameter point.
    pub w: Vec<f64>,
}

impl Trace {
    pub fn best_objective(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.objective).reduce(f64::max)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.rows.last().map(|r| r.objective)
    }

    pub fn median_cad_iterations(&self) -> f64 {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.cad_iters).collect();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_unstable();
        let k = v.len();
        if k % 2 == 1 {
            v[k / 2] as f64
        } else {
            (v[k / 2 - 1] + v[k / 2]) as f64 / 2.0
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DescentError> {
        let mut w = csv::Writer::from_writer(writer);
        if self.rows.is_empty() {
            w.write_record(["iteration", "objective", "violation", "dual_norm", "cad_iters"])?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Objective value and gradient at `x` (objectives are maximized).
pub fn objective_eval(objective: &Objective, x: &[f64]) -> Result<(f64, Vec<f64>), DescentError> {
    let n = x.len();
    match objective {
        Objective::None => Ok((0.0, vec![0.0; n])),
        Objective::Linear { c } => Ok((dot(c, x), c.clone())),
        Objective::Quadratic { c, q, .. } => {
            let mut qx = vec![0.0; n];
            let mut qtx = vec![0.0; n];
            for &(i, j, v) in q {
                qx[i] += v * x[j];
                qtx[j] += v * x[i];
            }
            let value = dot(x, &qx) + dot(c, x);
            let grad = (0..n).map(|k| qx[k] + qtx[k] + c[k]).collect();
            Ok((value, grad))
        }
        Objective::TransmitPower(p) => {
            if let Some(i) = x.iter().position(|&v| v < -DOMAIN_TOLERANCE) {
                return Err(DescentError::Domain(i));
            }
            let (diag, interference) = p.signal_and_interference(x);
            let noise = p.sigma * p.sigma;
            let scale = 1.0 / n as f64;
            let mut value = 0.0;
            let mut grad = vec![0.0; n];
            for i in 0..n {
                let quiet = interference[i] + noise;
                let total = diag[i] * x[i] + quiet;
                value += (total / quiet).ln();
                grad[i] += scale * diag[i] / total;
            }
            for &(i, k, h) in p.h.iter().filter(|t| t.0 != t.1) {
                let quiet = interference[i] + noise;
                let total = diag[i] * x[i] + quiet;
                grad[k] += scale * (h / total - h / quiet);
            }
            Ok((scale * value, grad))
        }
    }
}

/// `Jᵀ ∇f(y) - c_h (w - y)`.
pub fn update_direction(jacobian: &JacobianOperator, grad: &[f64], w: &[f64], y: &[f64], ch: f64) -> Vec<f64> {
    let mut step = jacobian.apply_transpose(grad);
    for ((s, wi), yi) in step.iter_mut().zip(w).zip(y) {
        *s -= ch * (wi - yi);
    }
    step
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub fn descend(instance: &ProblemInstance, cfg: &DescentConfig) -> Result<Trace, DescentError> {
    let w0 = gen_initial_point(instance.system.n(), 1.0, cfg.seed);
    descend_from(instance, cfg, w0)
}

/// [`descend`] from a given starting `w`.
pub fn descend_from(instance: &ProblemInstance, cfg: &DescentConfig, w0: Vec<f64>) -> Result<Trace, DescentError> {
    cfg.check()?;
    let system = &instance.system;
    let projector = Projector::new(system, cfg.solver)?;
    let partition: &ConstraintPartition = projector.partition();
    let mut w = w0;
    let mut rows = Vec::with_capacity(cfg.iterations);
    let mut point = Vec::new();
    let mut truncated = false;

    for t in 1..=cfg.iterations {
        let r = projector.project(&w)?;
        if !r.all_converged() {
            log::warn!("projection did not converge at step {t}; stopping");
            truncated = true;
            break;
        }
        let y = r.point;
        let eta = if cfg.decay { cfg.eta / (t as f64).sqrt() } else { cfg.eta };

        let (_, grad) = objective_eval(&instance.objective, &y)?;
        let mut refined = y.clone();
        for _ in 0..cfg.svc_steps {
            let (_, g) = objective_eval(&instance.objective, &refined)?;
            let v: Vec<f64> = g.iter().map(|gi| eta * gi).collect();
            refined = clip(&refined, &v, system, partition, ClipMode::Sparse, cfg.solver.epsilon)?.output;
        }
        let (value, _) = objective_eval(&instance.objective, &refined)?;
        let dual_norm = w.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        rows.push(TraceRow {
            iteration: t,
            objective: value,
            violation: system.max_normalized_violation(&refined).max(0.0),
            dual_norm,
            cad_iters: r.iterations.iter().copied().max().unwrap_or(0),
        });

        let jacobian = match cfg.gradient {
            GradientKind::Surrogate => JacobianOperator::surrogate_from_projection(&w, &y),
            GradientKind::Exact => JacobianOperator::exact_from_projection(&w, &y, system, false)?,
        };
        let step = update_direction(&jacobian, &grad, &w, &y, cfg.ch);
        for (wi, si) in w.iter_mut().zip(&step) {
            *wi += eta * si;
        }
        point = refined;
    }
    Ok(Trace {
        rows,
        truncated,
        point,
        w,
    })
}
