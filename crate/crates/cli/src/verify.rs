//! Oracle-backed property suites run on freshly generated small systems.
//!
//! Every trial is identified by its seed, so a failure can be replayed with
//! `--seed <s> --trials 1`.

use std::fmt;
use std::str::FromStr;

use anyhow::Result;
use cadproj::gradient::{exact_jacobian, finite_difference_jacobian, surrogate_jacobian, JacobianOperator};
use cadproj::oracle::{hit_and_run, project_bruteforce};
use cadproj::probgen::{gen_constraints, gen_constraints_with_witness, gen_initial_point, GeneratorConfig};
use cadproj::{
    cad_raw, cad_with_column_scaling, clip, partition, Algorithm, ClipMode, GradientError, Projector,
    SolverConfig, SparseConstraintSystem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Theorem1,
    Prop1,
    Svc,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Theorem1, Suite::Prop1, Suite::Svc];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Theorem1 => "theorem1",
            Suite::Prop1 => "prop1",
            Suite::Svc => "svc",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub trials: usize,
    pub seed: u64,
    /// Runs the scaled projection with column weights `l + 1` instead of
    /// `l`. Only useful for checking that the suite can fail.
    pub tamper: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub seed: u64,
    pub check: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    /// Individual property evaluations that ran.
    pub checks: usize,
    /// Trials skipped because the point was too close to a kink.
    pub skipped: usize,
    pub failures: Vec<Failure>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            checks: 0,
            skipped: 0,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checks > 0
    }

    fn check(&mut self, ok: bool, seed: u64, check: &'static str, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(Failure {
                seed,
                check,
                detail: detail(),
            });
        }
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport> {
    match suite {
        Suite::Theorem1 => theorem1(opts),
        Suite::Prop1 => prop1(opts),
        Suite::Svc => svc(opts),
    }
}

const EQUIVALENCE_TOLERANCE: f64 = 1e-4;

/// `2 <= n <= max_n`, `1 <= m <= max_m`, `d = 3`, start `U(-3, 3)`.
fn small_case(seed: u64, max_n: usize, max_m: usize) -> Result<(SparseConstraintSystem, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n);
    let m = rng.random_range(1..=max_m);
    let system = gen_constraints(&GeneratorConfig::new(n, m, 3, seed))?;
    let x = gen_initial_point(n, 3.0, seed.wrapping_add(1_000_003));
    Ok((system, x))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (u, v)| f64::max(m, (u - v).abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn theorem1(opts: &VerifyOptions) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Theorem1);
    let cfg = SolverConfig::new(Algorithm::CadScaled, 1e-10).with_max_iterations(1_000_000);
    for t in 0..opts.trials as u64 {
        let seed = opts.seed + t;
        let (s, x) = small_case(seed, 10, 8)?;
        let p = partition(&s);
        let degrees: Vec<f64> = s.var_degrees().iter().map(|&l| l as f64).collect();
        let weights: Vec<f64> = degrees
            .iter()
            .map(|&l| if opts.tamper { l + 1.0 } else { l })
            .collect();
        let scaled = cad_with_column_scaling(&x, &s, &p, &cfg, &weights)?;
        let raw = cad_raw(&x, &s, &p, &cfg)?;
        let orthogonal = project_bruteforce(&x, &s, &vec![1.0; s.n()])?;
        let weighted = project_bruteforce(&x, &s, &degrees.iter().map(|&l| l.max(1.0)).collect::<Vec<_>>())?;

        report.check(scaled.all_converged() && raw.all_converged(), seed, "converged", || {
            format!("scaled {:?}, raw {:?}", scaled.iterations, raw.iterations)
        });
        let err = max_abs_diff(&scaled.point, &orthogonal.point);
        report.check(err <= EQUIVALENCE_TOLERANCE, seed, "scaled = orthogonal", || format!("error {err:e}"));
        let err = max_abs_diff(&raw.point, &weighted.point);
        report.check(err <= EQUIVALENCE_TOLERANCE, seed, "raw = l-weighted", || format!("error {err:e}"));
    }
    Ok(report)
}

fn tight(system: &SparseConstraintSystem) -> Result<Projector<'_>> {
    Ok(Projector::new(
        system,
        SolverConfig::new(Algorithm::CadScaled, 1e-12).with_max_iterations(1_000_000),
    )?)
}

fn hypercube(n: usize) -> Result<SparseConstraintSystem> {
    let triplets = (0..n).flat_map(|j| [(2 * j, j, 1.0), (2 * j + 1, j, -1.0)]);
    let b = (0..2 * n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
    Ok(SparseConstraintSystem::new(n, triplets, b)?)
}

fn prop1(opts: &VerifyOptions) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Prop1);
    for n in 2..=5 {
        let s = hypercube(n)?;
        let p = tight(&s)?;
        let x = vec![2.0; n];
        let exact = exact_jacobian(&x, &p)?.rank();
        let surrogate = surrogate_jacobian(&x, &p)?.rank();
        report.check(exact == 0 && surrogate == n - 1, n as u64, "hypercube corner ranks", || {
            format!("n = {n}: exact {exact}, surrogate {surrogate}")
        });
    }

    for t in 0..opts.trials as u64 {
        let seed = opts.seed + t;
        let (s, x) = small_case(seed, 6, 6)?;
        let p = tight(&s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let surrogate = surrogate_jacobian(&x, &p)?;
        let rank = surrogate.rank();
        let expected = if surrogate.direction().is_some() { s.n() - 1 } else { s.n() };
        report.check(rank == expected, seed, "surrogate rank", || format!("rank {rank}, expected {expected}"));

        let exact = match exact_jacobian(&x, &p) {
            Ok(j) => j,
            Err(GradientError::AmbiguousActiveSet { .. }) => {
                report.skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };

        let v = gaussian(&mut rng, s.n());
        let (e, g) = (exact.apply(&v), surrogate.apply(&v));
        let gap = (dot(&e, &g) - dot(&e, &e)).abs();
        report.check(gap <= 1e-8, seed, "alignment", || format!("|<Jv, Sv> - |Jv|²| = {gap:e}"));

        let fd = finite_difference_jacobian(&x, &p, 1e-6)?;
        let err = exact
            .to_dense()
            .iter()
            .zip(&fd)
            .map(|(a, b)| max_abs_diff(a, b))
            .fold(0.0, f64::max);
        report.check(err <= 1e-5, seed, "exact = finite differences", || format!("error {err:e}"));

        let dist = exact
            .to_dense()
            .iter()
            .zip(surrogate.to_dense())
            .map(|(a, b)| max_abs_diff(a, &b))
            .fold(0.0, f64::max);
        let single = exact.active_set().len() <= 1;
        report.check(single == (dist <= 1e-8), seed, "exact = surrogate iff single active", || {
            format!("active {:?}, distance {dist:e}", exact.active_set())
        });

        if exact.direction().is_some() {
            local_step(&mut report, seed, &s, &x, &exact, &mut rng)?;
        }
    }
    Ok(report)
}

/// Small steps along `J v` and `S v` that keep the active set land on the
/// same projection.
fn local_step(
    report: &mut SuiteReport,
    seed: u64,
    s: &SparseConstraintSystem,
    x: &[f64],
    exact: &JacobianOperator,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let ones = vec![1.0; s.n()];
    let active_of = |z: &[f64]| project_bruteforce(z, s, &ones).map(|r| r.active_set);
    let surrogate = JacobianOperator::surrogate_from_projection(x, exact.projected_point());
    let active = active_of(x)?;
    let dir = gaussian(rng, s.n());
    let norm = dot(&dir, &dir).sqrt();
    let mut beta = 1.0 / norm;
    while beta * norm >= 1e-8 {
        let v: Vec<f64> = dir.iter().map(|d| beta * d).collect();
        let a: Vec<f64> = x.iter().zip(exact.apply(&v)).map(|(x, e)| x + e).collect();
        let b: Vec<f64> = x.iter().zip(surrogate.apply(&v)).map(|(x, e)| x + e).collect();
        if active_of(&a)? == active && active_of(&b)? == active {
            let pa = project_bruteforce(&a, s, &ones)?.point;
            let pb = project_bruteforce(&b, s, &ones)?.point;
            let err = max_abs_diff(&pa, &pb);
            report.check(err <= 1e-6, seed, "local step equivalence", || format!("error {err:e}"));
            return Ok(());
        }
        beta /= 2.0;
    }
    report.skipped += 1;
    Ok(())
}

fn svc(opts: &VerifyOptions) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(Suite::Svc);
    let w = SparseConstraintSystem::new(2, [(0, 0, 1.0), (1, 1, 1.0)], vec![1.0, 1.0])?;
    let wp = partition(&w);
    let sparse = clip(&[0.0, 0.0], &[2.0, 0.5], &w, &wp, ClipMode::Sparse, 0.0)?.output;
    let standard = clip(&[0.0, 0.0], &[2.0, 0.5], &w, &wp, ClipMode::Standard, 0.0)?.output;
    report.check(sparse == [1.0, 0.5] && standard == [1.0, 0.25], 0, "reachability witness", || {
        format!("sparse {sparse:?}, standard {standard:?}")
    });

    for t in 0..opts.trials as u64 {
        let seed = opts.seed + t;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(3..=30);
        let m = rng.random_range(1..=25);
        let cfg = GeneratorConfig::new(n, m, 3, seed).with_bounding_box(true);
        let (s, witness) = gen_constraints_with_witness(&cfg)?;
        let p = partition(&s);
        let z = hit_and_run(&s, &witness, 50, seed)?;
        let scale = rng.random_range(0.1..10.0);
        let v: Vec<f64> = gaussian(&mut rng, n).into_iter().map(|a| scale * a).collect();
        let tol = 1e-9 * (1.0 + s.b().iter().fold(0.0f64, |a, b| a.max(b.abs())));
        for mode in [ClipMode::Sparse, ClipMode::Standard] {
            let r = clip(&z, &v, &s, &p, mode, tol)?;
            let viol = s.max_violation(&r.output);
            report.check(viol <= tol, seed, "clipped output feasible", || format!("{mode:?}: violation {viol:e}"));
            if mode == ClipMode::Sparse {
                let dominated = r.component_alphas.iter().all(|a| *a >= r.global_alpha);
                report.check(dominated, seed, "component alpha >= global alpha", String::new);
            }
        }
    }
    Ok(report)
}
