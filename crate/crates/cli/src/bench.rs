//! Generation, projection and descent runners.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cadproj::descent::{descend, objective_eval, DescentConfig, GradientKind, Trace};
use cadproj::io::{read_instance, write_instance};
use cadproj::probgen::{gen_initial_point, generate, Family, GeneratorConfig, ProblemInstance};
use cadproj::{Algorithm, Projector, SolverConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One CSV row of a projection benchmark. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance_id: String,
    pub family: String,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub delta: f64,
    pub method: String,
    pub epsilon: f64,
    /// Largest iteration count over components.
    pub iterations: usize,
    pub runtime_ms: f64,
    pub violation: f64,
    pub objective: Option<f64>,
    pub converged: bool,
    pub seed: u64,
}

pub fn write_records<W: Write>(writer: W, records: &[BenchRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if records.is_empty() {
        w.write_record([
            "instance_id", "family", "n", "m", "d", "delta", "method", "epsilon", "iterations", "runtime_ms",
            "violation", "objective", "converged", "seed",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub family: Family,
    pub n: usize,
    /// Defaults to `round(0.75 n)`.
    pub m: Option<usize>,
    pub d: usize,
    pub delta: f64,
    pub seed: u64,
    pub count: usize,
    pub offset: bool,
    pub bounding_box: bool,
}

pub fn default_m(n: usize) -> usize {
    ((0.75 * n as f64).round() as usize).max(1)
}

/// Writes `count` instances with seeds `seed, seed + 1, ...` and returns the
/// paths in seed order.
pub fn run_gen(opts: &GenOptions, out: &Path) -> Result<Vec<PathBuf>> {
    if opts.count == 0 {
        bail!("--count must be at least 1");
    }
    if opts.family == Family::Power && (opts.m.is_some() || opts.bounding_box || !opts.offset) {
        bail!("power instances take neither --m, --bounding-box nor --no-offset");
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let m = opts.m.unwrap_or_else(|| default_m(opts.n));
    let mut paths = Vec::with_capacity(opts.count);
    for k in 0..opts.count as u64 {
        let seed = opts.seed + k;
        let cfg = GeneratorConfig::new(opts.n, m, opts.d, seed)
            .with_delta(opts.delta)
            .with_offset(opts.offset)
            .with_bounding_box(opts.bounding_box);
        let inst = generate(opts.family, &cfg)?;
        let path = out.join(format!(
            "{}-n{}-m{}-s{}.json",
            opts.family.name(),
            inst.system.n(),
            inst.system.m(),
            seed
        ));
        write_instance(&path, &inst)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reads instance files; directories contribute every `*.json` inside.
/// The instance id is the file stem. Output is sorted by id.
pub fn load_instances(inputs: &[PathBuf]) -> Result<Vec<(String, ProblemInstance)>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            for entry in fs::read_dir(p)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e == "json") {
                    files.push(path);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let id = f
            .file_stem()
            .and_then(|s| s.to_str())
            .with_context(|| format!("bad file name {}", f.display()))?
            .to_string();
        let inst = read_instance(&f).with_context(|| format!("reading {}", f.display()))?;
        out.push((id, inst));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = out.windows(2).find(|w| w[0].0 == w[1].0) {
        bail!("duplicate instance id `{}`", w[0].0);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct ProjectOptions {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub max_iterations: usize,
    pub delta: f64,
    pub repeats: usize,
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectOutcome {
    pub record: BenchRecord,
    pub repeat: usize,
    pub start: Vec<f64>,
    pub point: Vec<f64>,
}

/// Seed of the start point for one (instance, repeat) pair.
pub fn start_seed(instance_seed: u64, base: u64, repeat: usize) -> u64 {
    instance_seed
        .wrapping_mul(1_000_003)
        .wrapping_add(base.wrapping_mul(7919))
        .wrapping_add(repeat as u64)
}

/// Projects `repeats` random start points `U(-δ, δ)` per instance. Runs are
/// spread over a pool of `jobs` threads; the output is ordered by
/// (instance id, repeat) whatever the pool size.
pub fn run_project(instances: &[(String, ProblemInstance)], opts: &ProjectOptions) -> Result<Vec<ProjectOutcome>> {
    if opts.repeats == 0 || opts.jobs == 0 {
        bail!("--repeats and --jobs must be at least 1");
    }
    let solver = SolverConfig::new(opts.algorithm, opts.epsilon)
        .with_max_iterations(opts.max_iterations)
        .with_parallel(opts.jobs > 1);
    let projectors = instances
        .iter()
        .map(|(id, inst)| Projector::new(&inst.system, solver).with_context(|| format!("instance {id}")))
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|i| (0..opts.repeats).map(move |r| (i, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build()?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, repeat)| {
                let (id, inst) = &instances[i];
                let seed = start_seed(inst.meta.seed, opts.seed, repeat);
                let start = gen_initial_point(inst.system.n(), opts.delta, seed);
                let clock = Instant::now();
                let r = projectors[i].project(&start).with_context(|| format!("instance {id}"))?;
                let runtime_ms = clock.elapsed().as_secs_f64() * 1e3;
                let objective = objective_eval(&inst.objective, &r.point).ok().map(|(v, _)| v);
                let record = BenchRecord {
                    instance_id: id.clone(),
                    family: inst.meta.family.name().to_string(),
                    n: inst.system.n(),
                    m: inst.system.m(),
                    d: inst.meta.d,
                    delta: opts.delta,
                    method: opts.algorithm.name().to_string(),
                    epsilon: opts.epsilon,
                    iterations: r.max_iterations(),
                    runtime_ms,
                    violation: r.violation.max(0.0),
                    objective,
                    converged: r.all_converged(),
                    seed,
                };
                Ok(ProjectOutcome {
                    record,
                    repeat,
                    start,
                    point: r.point,
                })
            })
            .collect()
    })
}

#[derive(Serialize)]
struct PointLine<'a> {
    instance_id: &'a str,
    repeat: usize,
    point: &'a [f64],
}

/// One JSON object per line with the projected point of every run.
pub fn write_points<W: Write>(mut writer: W, outcomes: &[ProjectOutcome]) -> Result<()> {
    for o in outcomes {
        let line = PointLine {
            instance_id: &o.record.instance_id,
            repeat: o.repeat,
            point: &o.point,
        };
        serde_json::to_writer(&mut writer, &line)?;
        writeln!(writer)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DescendOptions {
    /// One entry per gradient kind to run; two entries give a paired run.
    pub gradients: Vec<GradientKind>,
    pub eta: f64,
    pub steps: usize,
    pub ch: f64,
    pub svc_steps: usize,
    pub decay: bool,
    pub seed: u64,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescendSummary {
    pub instance_id: String,
    pub gradient: GradientKind,
    pub trace_path: PathBuf,
    pub final_objective: Option<f64>,
    pub best_objective: Option<f64>,
    pub median_cad_iterations: f64,
    pub truncated: bool,
}

/// Runs every (instance, gradient) pair with the same start seed and writes
/// `<id>-<gradient>.csv` traces into `out`.
pub fn run_descend(
    instances: &[(String, ProblemInstance)],
    opts: &DescendOptions,
    out: &Path,
) -> Result<Vec<DescendSummary>> {
    if opts.gradients.is_empty() {
        bail!("no gradient kind selected");
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let tasks: Vec<(usize, GradientKind)> = (0..instances.len())
        .flat_map(|i| opts.gradients.iter().map(move |&g| (i, g)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs.max(1)).build()?;
    let traces: Vec<Trace> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, gradient)| {
                let (id, inst) = &instances[i];
                let cfg = DescentConfig::new(gradient, opts.eta, opts.steps)
                    .with_penalty(opts.ch)
                    .with_svc_steps(opts.svc_steps)
                    .with_decay(opts.decay)
                    .with_seed(start_seed(inst.meta.seed, opts.seed, 0));
                descend(inst, &cfg).with_context(|| format!("instance {id}, {} gradient", gradient.name()))
            })
            .collect::<Result<_>>()
    })?;
    let mut summaries = Vec::with_capacity(tasks.len());
    for (&(i, gradient), trace) in tasks.iter().zip(&traces) {
        let id = &instances[i].0;
        let path = out.join(format!("{id}-{}.csv", gradient.name()));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        trace.write_csv(file)?;
        summaries.push(DescendSummary {
            instance_id: id.clone(),
            gradient,
            trace_path: path,
            final_objective: trace.final_objective(),
            best_objective: trace.best_objective(),
            median_cad_iterations: trace.median_cad_iterations(),
            truncated: trace.truncated,
        });
    }
    Ok(summaries)
}
