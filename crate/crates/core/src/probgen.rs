//! Seeded problem generators.
//!
//! Every generator draws from its own ChaCha8 stream derived from the
//! configuration seed, so the same `(config, seed)` always reproduces the
//! same instance bit for bit.
//!
//! Random constraints have unit rows with about `d` nonzeros each. With the
//! offset, `b = u + A s` with `u_i ~ U(0.1, 1)` and `s ~ N(0, I)`, so the
//! ball of radius `0.1` around `s` is feasible. Without it, `b = max(A s,
//! 0.1)`, which makes the ball of radius `0.1` around the origin feasible.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::GenError;
use crate::system::SparseConstraintSystem;

const STREAM_CONSTRAINTS: u64 = 1;
const STREAM_OBJECTIVE: u64 = 2;
const STREAM_INITIAL: u64 = 3;
const STREAM_GEOMETRY: u64 = 4;

pub const DEFAULT_SIGMA: f64 = 0.1;
pub const DEFAULT_P_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Lp,
    QuadEr,
    QuadBa,
    Power,
    ConstraintsOnly,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Lp,
        Family::QuadEr,
        Family::QuadBa,
        Family::Power,
        Family::ConstraintsOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Lp => "lp",
            Family::QuadEr => "quad-er",
            Family::QuadBa => "quad-ba",
            Family::Power => "power",
            Family::ConstraintsOnly => "constraints-only",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown family `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    #[serde(rename = "ER")]
    ErdosRenyi,
    #[serde(rename = "BA")]
    BarabasiAlbert,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub n: usize,
    /// Number of random rows (box rows come on top).
    pub m: usize,
    /// Target nonzeros per row.
    pub d: usize,
    /// Scale of initial points.
    pub delta: f64,
    /// `b = u + A s` when set, otherwise `b = max(A s, 0.1)`.
    pub offset: bool,
    /// Append `±x_j <= β_j` rows built by the same recipe, so the polytope is
    /// bounded.
    pub bounding_box: bool,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(n: usize, m: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            d,
            delta: 1.0,
            offset: true,
            bounding_box: false,
            seed,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_offset(mut self, offset: bool) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_bounding_box(mut self, bounding_box: bool) -> Self {
        self.bounding_box = bounding_box;
        self
    }

    fn check(&self) -> Result<(), GenError> {
        if self.n == 0 {
            return Err(GenError::Config("n must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(GenError::Config("d must be at least 1".into()));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(GenError::Config(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub seed: u64,
    pub family: Family,
    pub d: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    None,
    /// `cᵀx`.
    Linear { c: Vec<f64> },
    /// `xᵀQx + cᵀx` with `Q` stored as symmetric triplets.
    Quadratic {
        c: Vec<f64>,
        q: Vec<(usize, usize, f64)>,
        topology: Topology,
    },
    /// Mean channel capacity `(1/n) Σ log(1 + H_ii x_i / (Σ_{j≠i} H_ij x_j + σ²))`.
    TransmitPower(TransmitPower),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitPower {
    /// Gain triplets `(i, j, H_ij)`, row-major, diagonal included.
    pub h: Vec<(usize, usize, f64)>,
    pub sigma: f64,
    /// Rate requirements `s_i > 0`.
    pub s: Vec<f64>,
    pub p_max: f64,
}

impl TransmitPower {
    /// `(H_ii, Σ_{j≠i} H_ij x_j)` for every user.
    pub fn signal_and_interference(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = x.len();
        let mut diag = vec![0.0; n];
        let mut interference = vec![0.0; n];
        for &(i, j, h) in &self.h {
            if i == j {
                diag[i] = h;
            } else {
                interference[i] += h * x[j];
            }
        }
        (diag, interference)
    }

    /// `c_i = log(1 + H_ii x_i / (I_i + σ²))`.
    pub fn capacities(&self, x: &[f64]) -> Vec<f64> {
        let (diag, interference) = self.signal_and_interference(x);
        let noise = self.sigma * self.sigma;
        (0..x.len())
            .map(|i| (1.0 + diag[i] * x[i] / (interference[i] + noise)).ln())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub system: SparseConstraintSystem,
    pub objective: Objective,
    pub meta: InstanceMeta,
    /// A point known to be feasible, when the generator has one.
    pub witness: Option<Vec<f64>>,
}

/// Random unit-row constraints together with the witness `s`.
pub fn gen_constraints_with_witness(cfg: &GeneratorConfig) -> Result<(SparseConstraintSystem, Vec<f64>), GenError> {
    cfg.check()?;
    let n = cfg.n;
    let mut rng = stream(cfg.seed, STREAM_CONSTRAINTS);
    let p = (cfg.d as f64 - 1.0) / n as f64;

    let mut triplets = Vec::new();
    for i in 0..cfg.m {
        let mut cols: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < p).collect();
        let unused: Vec<usize> = (0..n).filter(|j| cols.binary_search(j).is_err()).collect();
        if !unused.is_empty() {
            let extra = unused[rng.random_range(0..unused.len())];
            let at = cols.partition_point(|&c| c < extra);
            cols.insert(at, extra);
        }
        let values: Vec<f64> = cols.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        triplets.extend(cols.into_iter().zip(values).map(|(j, v)| (i, j, v / norm)));
    }
    if cfg.bounding_box {
        for j in 0..n {
            triplets.push((cfg.m + 2 * j, j, 1.0));
            triplets.push((cfg.m + 2 * j + 1, j, -1.0));
        }
    }
    let rows = cfg.m + if cfg.bounding_box { 2 * n } else { 0 };

    let s: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut lhs = vec![0.0; rows];
    for &(i, j, v) in &triplets {
        lhs[i] += v * s[j];
    }
    let b = lhs
        .into_iter()
        .map(|a| {
            if cfg.offset {
                a + rng.random_range(0.1..1.0)
            } else {
                a.max(0.1)
            }
        })
        .collect();
    let system = SparseConstraintSystem::new(n, triplets, b)?;
    Ok((system, s))
}

pub fn gen_constraints(cfg: &GeneratorConfig) -> Result<SparseConstraintSystem, GenError> {
    gen_constraints_with_witness(cfg).map(|(system, _)| system)
}

fn uniform_vector(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn constraint_instance(cfg: &GeneratorConfig, family: Family, objective: Objective) -> Result<ProblemInstance, GenError> {
    let (system, s) = gen_constraints_with_witness(cfg)?;
    Ok(ProblemInstance {
        system,
        objective,
        meta: InstanceMeta {
            seed: cfg.seed,
            family,
            d: cfg.d,
            delta: cfg.delta,
        },
        witness: Some(if cfg.offset { s } else { vec![0.0; cfg.n] }),
    })
}

/// Random constraints without an objective.
pub fn gen_constraints_only(cfg: &GeneratorConfig) -> Result<ProblemInstance, GenError> {
    constraint_instance(cfg, Family::ConstraintsOnly, Objective::None)
}

/// `max cᵀx` with `c_i ~ U(-1, 1)`.
pub fn gen_lp(cfg: &GeneratorConfig) -> Result<ProblemInstance, GenError> {
    cfg.check()?;
    let mut rng = stream(cfg.seed, STREAM_OBJECTIVE);
    let c = uniform_vector(&mut rng, cfg.n, -1.0, 1.0);
    constraint_instance(cfg, Family::Lp, Objective::Linear { c })
}

/// `max xᵀQx + cᵀx` with `Q` supported on a random graph, entries
/// `U(-10, 10)`, and `c_i ~ U(-1, 1)`.
pub fn gen_quadratic(cfg: &GeneratorConfig, topology: Topology) -> Result<ProblemInstance, GenError> {
    cfg.check()?;
    let mut rng = stream(cfg.seed, STREAM_OBJECTIVE);
    let edges = match topology {
        Topology::ErdosRenyi => erdos_renyi(&mut rng, cfg.n, cfg.d as f64 / cfg.n as f64),
        Topology::BarabasiAlbert => barabasi_albert(&mut rng, cfg.n, (cfg.d as f64 / 2.0).round().max(1.0) as usize),
    };
    let mut q = Vec::with_capacity(2 * edges.len());
    for (i, j) in edges {
        let v = rng.random_range(-10.0..10.0);
        q.push((i, j, v));
        q.push((j, i, v));
    }
    q.sort_by_key(|&(i, j, _)| (i, j));
    let c = uniform_vector(&mut rng, cfg.n, -1.0, 1.0);
    let family = match topology {
        Topology::ErdosRenyi => Family::QuadEr,
        Topology::BarabasiAlbert => Family::QuadBa,
    };
    constraint_instance(cfg, family, Objective::Quadratic { c, q, topology })
}

/// Undirected edges `(i, j)`, `i < j`, each present with probability `p`.
pub fn erdos_renyi(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Preferential attachment: a star on `attach + 1` nodes, then every new
/// node links to `attach` distinct nodes drawn proportionally to degree.
pub fn barabasi_albert(rng: &mut impl Rng, n: usize, attach: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    if n <= attach + 1 {
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        return edges;
    }
    // every edge endpoint once, so uniform picks are degree-proportional
    let mut endpoints = Vec::new();
    for j in 1..=attach {
        edges.push((0, j));
        endpoints.extend([0, j]);
    }
    for v in attach + 1..n {
        let mut targets: Vec<usize> = Vec::with_capacity(attach);
        while targets.len() < attach {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        targets.sort_unstable();
        for t in targets {
            edges.push((t, v));
            endpoints.extend([t, v]);
        }
    }
    edges
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    pub sigma: f64,
    pub p_max: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            p_max: DEFAULT_P_MAX,
        }
    }
}

pub fn gen_transmit_power(cfg: &GeneratorConfig) -> Result<ProblemInstance, GenError> {
    gen_transmit_power_with(cfg, PowerParams::default())
}

/// Sum-capacity power allocation on a random geometric graph.
///
/// Users sit uniformly in the unit square and interfere when closer than
/// `r = √(d / ((n - 1)π))`; distances are divided by `r` and gains are
/// `H_ij = (d_ij + 1)^-3` (so `H_ii = 1`). Requirements are half the
/// capacities of a random witness `x̂_i ~ U(0.1, p_max)`. The emitted rows are
///
/// ```text
/// (e^{s_i} - 1) Σ_{j≠i} H_ij x_j - H_ii x_i <= -(e^{s_i} - 1) σ²
/// -x_i <= 0,   x_i <= p_max
/// ```
///
/// `cfg.m` is ignored; there are always `3n` rows.
pub fn gen_transmit_power_with(cfg: &GeneratorConfig, params: PowerParams) -> Result<ProblemInstance, GenError> {
    cfg.check()?;
    if !(params.sigma > 0.0 && params.p_max > 0.1) {
        return Err(GenError::Config("need sigma > 0 and p_max > 0.1".into()));
    }
    let n = cfg.n;
    let mut rng = stream(cfg.seed, STREAM_GEOMETRY);
    let pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
    let radius = if n > 1 {
        (cfg.d as f64 / ((n - 1) as f64 * std::f64::consts::PI)).sqrt()
    } else {
        1.0
    };
    let mut h = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                h.push((i, i, 1.0));
                continue;
            }
            let dist = ((pos[i].0 - pos[j].0).powi(2) + (pos[i].1 - pos[j].1).powi(2)).sqrt();
            if dist < radius {
                h.push((i, j, (dist / radius + 1.0).powi(-3)));
            }
        }
    }

    let mut rng = stream(cfg.seed, STREAM_OBJECTIVE);
    let witness = uniform_vector(&mut rng, n, 0.1, params.p_max);
    let mut power = TransmitPower {
        h,
        sigma: params.sigma,
        s: Vec::new(),
        p_max: params.p_max,
    };
    power.s = power.capacities(&witness).into_iter().map(|c| 0.5 * c).collect();

    let noise = params.sigma * params.sigma;
    let mut triplets = Vec::new();
    let mut b = Vec::with_capacity(3 * n);
    for i in 0..n {
        let k = power.s[i].exp_m1();
        for &(r, j, g) in power.h.iter().filter(|t| t.0 == i) {
            triplets.push((r, j, if j == i { -g } else { k * g }));
        }
        b.push(-k * noise);
    }
    for i in 0..n {
        triplets.push((n + 2 * i, i, -1.0));
        b.push(0.0);
        triplets.push((n + 2 * i + 1, i, 1.0));
        b.push(params.p_max);
    }
    let system = SparseConstraintSystem::new(n, triplets, b)?;
    Ok(ProblemInstance {
        system,
        objective: Objective::TransmitPower(power),
        meta: InstanceMeta {
            seed: cfg.seed,
            family: Family::Power,
            d: cfg.d,
            delta: cfg.delta,
        },
        witness: Some(witness),
    })
}

pub fn generate(family: Family, cfg: &GeneratorConfig) -> Result<ProblemInstance, GenError> {
    match family {
        Family::Lp => gen_lp(cfg),
        Family::QuadEr => gen_quadratic(cfg, Topology::ErdosRenyi),
        Family::QuadBa => gen_quadratic(cfg, Topology::BarabasiAlbert),
        Family::Power => gen_transmit_power(cfg),
        Family::ConstraintsOnly => gen_constraints_only(cfg),
    }
}

/// `x_i ~ U(-δ, δ)`; the origin for `δ = 0`.
pub fn gen_initial_point(n: usize, delta: f64, seed: u64) -> Vec<f64> {
    if delta == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = stream(seed, STREAM_INITIAL);
    (0..n).map(|_| rng.random_range(-delta..=delta)).collect()
}
