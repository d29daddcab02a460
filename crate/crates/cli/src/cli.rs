//! Argument parsing and command dispatch.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cadproj::descent::GradientKind;
use cadproj::oracle::project_bruteforce;
use cadproj::probgen::Family;
use cadproj::Algorithm;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    load_instances, run_descend, run_gen, run_project, write_points, write_records, DescendOptions, GenOptions,
    ProjectOptions,
};
use crate::verify::{run_suite, Suite, VerifyOptions};
use crate::OUT_DIR_ENV;

#[derive(Debug, Parser)]
#[command(name = "cadbench", version, about = "Sparse polytope projection benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate instance files.
    Gen(GenArgs),
    /// Project random start points onto instance constraints.
    Project(ProjectArgs),
    /// Run oracle property suites on fresh small systems.
    Verify(VerifyArgs),
    /// Gradient ascent through the projection; writes trace CSVs.
    Descend(DescendArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Lp,
    QuadEr,
    QuadBa,
    Power,
    ConstraintsOnly,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Lp => Family::Lp,
            FamilyArg::QuadEr => Family::QuadEr,
            FamilyArg::QuadBa => Family::QuadBa,
            FamilyArg::Power => Family::Power,
            FamilyArg::ConstraintsOnly => Family::ConstraintsOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgArg {
    Cad,
    CadRaw,
    Simul,
    TwoSet,
}

impl From<AlgArg> for Algorithm {
    fn from(a: AlgArg) -> Self {
        match a {
            AlgArg::Cad => Algorithm::CadScaled,
            AlgArg::CadRaw => Algorithm::CadRaw,
            AlgArg::Simul => Algorithm::Simultaneous,
            AlgArg::TwoSet => Algorithm::TwoSet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Theorem1,
    Prop1,
    Svc,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GradArg {
    Surrogate,
    Exact,
    /// Surrogate and exact from the same start.
    Both,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub n: usize,
    /// Number of random rows; defaults to round(0.75 n).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// Recorded in the instance metadata.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Right-hand sides `max(A s, 0.1)` (origin strictly inside) instead of `A s + U(0.1, 1)`.
    #[arg(long)]
    pub no_offset: bool,
    /// Append `±x_j` rows so the polytope is bounded.
    #[arg(long)]
    pub bounding_box: bool,
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Instance files or directories of them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = AlgArg::Cad)]
    pub alg: AlgArg,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Start points are drawn from U(-delta, delta).
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Mixed into every start-point seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Benchmark rows go here; stdout otherwise.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Projected points as JSON lines.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Compare against the brute-force orthogonal projection (small m only).
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    pub suite: SuiteArg,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub tamper: bool,
}

#[derive(Debug, Args)]
pub struct DescendArgs {
    /// Instance files or directories; when absent, `--family` instances are generated.
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "inputs")]
    pub family: Option<FamilyArg>,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// First instance seed when generating.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instances to generate.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = GradArg::Surrogate)]
    pub grad: GradArg,
    #[arg(long, default_value_t = 0.0)]
    pub ch: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub svc_steps: usize,
    /// Step size eta / sqrt(t).
    #[arg(long)]
    pub decay: bool,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Project(a) => project(a),
        Command::Verify(a) => verify(a),
        Command::Descend(a) => descend(a),
    }
}

fn gen(a: GenArgs) -> Result<ExitCode> {
    let opts = GenOptions {
        family: a.family.into(),
        n: a.n,
        m: a.m,
        d: a.d,
        delta: a.delta,
        seed: a.seed,
        count: a.count,
        offset: !a.no_offset,
        bounding_box: a.bounding_box,
    };
    for p in run_gen(&opts, &a.out)? {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn project(a: ProjectArgs) -> Result<ExitCode> {
    let instances = load_instances(&a.inputs)?;
    let opts = ProjectOptions {
        algorithm: a.alg.into(),
        epsilon: a.eps,
        max_iterations: a.max_iter,
        delta: a.delta,
        repeats: a.repeats,
        seed: a.seed,
        jobs: a.jobs,
    };
    let outcomes = run_project(&instances, &opts)?;
    let records: Vec<_> = outcomes.iter().map(|o| o.record.clone()).collect();
    match &a.csv {
        Some(path) => write_records(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?, &records)?,
        None => write_records(io::stdout().lock(), &records)?,
    }
    if let Some(path) = &a.points {
        write_points(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?, &outcomes)?;
    }
    let unconverged = records.iter().filter(|r| !r.converged).count();
    if unconverged > 0 {
        log::warn!("{unconverged} of {} runs did not converge", records.len());
    }
    if a.verify {
        let mut worst = 0.0f64;
        for o in &outcomes {
            let inst = &instances.iter().find(|(id, _)| *id == o.record.instance_id).expect("known id").1;
            let truth = project_bruteforce(&o.start, &inst.system, &vec![1.0; inst.system.n()])?;
            let err = o.point.iter().zip(&truth.point).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(err);
        }
        eprintln!("max error against oracle: {worst:e}");
        if worst > 1e-4 {
            return Ok(ExitCode::FAILURE);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let suites: Vec<Suite> = match a.suite {
        SuiteArg::Theorem1 => vec![Suite::Theorem1],
        SuiteArg::Prop1 => vec![Suite::Prop1],
        SuiteArg::Svc => vec![Suite::Svc],
        SuiteArg::All => Suite::ALL.to_vec(),
    };
    let opts = VerifyOptions {
        trials: a.trials,
        seed: a.seed,
        tamper: a.tamper,
    };
    let mut ok = true;
    let mut out = io::stdout().lock();
    for suite in suites {
        let r = run_suite(suite, &opts)?;
        for f in &r.failures {
            writeln!(out, "FAIL {suite} seed {}: {}: {}", f.seed, f.check, f.detail)?;
        }
        let status = if r.passed() { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{status} {suite}: {} checks, {} failures, {} skipped",
            r.checks,
            r.failures.len(),
            r.skipped
        )?;
        ok &= r.passed();
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn descend(a: DescendArgs) -> Result<ExitCode> {
    let instances = match (a.inputs.is_empty(), a.family) {
        (false, _) => load_instances(&a.inputs)?,
        (true, Some(family)) => {
            let dir = instance_dir(&a.out)?;
            let opts = GenOptions {
                family: family.into(),
                n: a.n,
                m: a.m,
                d: a.d,
                delta: 1.0,
                seed: a.seed,
                count: a.count,
                offset: true,
                bounding_box: family != FamilyArg::Power,
            };
            run_gen(&opts, &dir)?;
            load_instances(&[dir])?
        }
        (true, None) => anyhow::bail!("give instance files or --family"),
    };
    let gradients = match a.grad {
        GradArg::Surrogate => vec![GradientKind::Surrogate],
        GradArg::Exact => vec![GradientKind::Exact],
        GradArg::Both => vec![GradientKind::Surrogate, GradientKind::Exact],
    };
    let opts = DescendOptions {
        gradients,
        eta: a.eta,
        steps: a.steps,
        ch: a.ch,
        svc_steps: a.svc_steps,
        decay: a.decay,
        seed: 0,
        jobs: a.jobs,
    };
    let mut out = io::stdout().lock();
    writeln!(out, "instance_id,gradient,final_objective,best_objective,median_cad_iters,truncated,trace")?;
    for s in run_descend(&instances, &opts, &a.out)? {
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.instance_id,
            s.gradient.name(),
            fmt(s.final_objective),
            fmt(s.best_objective),
            s.median_cad_iterations,
            s.truncated,
            s.trace_path.display()
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Generated instances for `descend --family` are kept next to the traces.
fn instance_dir(out: &std::path::Path) -> Result<PathBuf> {
    let dir = out.join("instances");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}
