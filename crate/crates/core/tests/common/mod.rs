#![allow(dead_code)]

use cadproj::oracle::project_bruteforce;
use cadproj::probgen::{gen_constraints, gen_initial_point, GeneratorConfig};
use cadproj::SparseConstraintSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random system with `2 <= n <= max_n`, `1 <= m <= max_m`, degree 3, and a
/// start point far enough out to usually be infeasible.
pub fn small_case(seed: u64, max_n: usize, max_m: usize) -> (SparseConstraintSystem, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n);
    let m = rng.random_range(1..=max_m);
    let system = gen_constraints(&GeneratorConfig::new(n, m, 3, seed)).unwrap();
    let x = gen_initial_point(n, 3.0, seed.wrapping_add(1_000_003));
    (system, x)
}

pub fn degree_weights(system: &SparseConstraintSystem) -> Vec<f64> {
    system
        .var_degrees()
        .iter()
        .map(|&l| if l == 0 { 1.0 } else { l as f64 })
        .collect()
}

pub fn orthogonal(x: &[f64], system: &SparseConstraintSystem) -> Vec<f64> {
    project_bruteforce(x, system, &vec![1.0; system.n()]).unwrap().point
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (u, v)| f64::max(m, (u - v).abs()))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}
