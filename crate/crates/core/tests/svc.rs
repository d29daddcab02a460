mod common;

use cadproj::oracle::hit_and_run;
use cadproj::partition::ConstraintPartition;
use cadproj::probgen::{gen_constraints_with_witness, GeneratorConfig};
use cadproj::{clip, clip_chain, partition, Alpha, ClipMode, SparseConstraintSystem};
use common::{gaussian, max_abs_diff};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Triple {
    system: SparseConstraintSystem,
    z: Vec<f64>,
    v: Vec<f64>,
}

fn triple(seed: u64) -> Triple {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=30);
    let m = rng.random_range(1..=25);
    let cfg = GeneratorConfig::new(n, m, 3, seed).with_bounding_box(true);
    let (system, witness) = gen_constraints_with_witness(&cfg).unwrap();
    let z = hit_and_run(&system, &witness, 50, seed).unwrap();
    let scale = rng.random_range(0.1..10.0);
    let v = gaussian(&mut rng, n).into_iter().map(|a| scale * a).collect();
    Triple { system, z, v }
}

fn tolerance(s: &SparseConstraintSystem) -> f64 {
    1e-9 * (1.0 + s.b().iter().fold(0.0f64, |m, b| m.max(b.abs())))
}

#[test]
fn outputs_stay_feasible() {
    for seed in 0..100 {
        let t = triple(seed);
        let p = partition(&t.system);
        let tol = tolerance(&t.system);
        assert!(t.system.max_violation(&t.z) <= tol, "seed {seed}: start infeasible");
        for mode in [ClipMode::Sparse, ClipMode::Standard] {
            let r = clip(&t.z, &t.v, &t.system, &p, mode, tol).unwrap();
            let viol = t.system.max_violation(&r.output);
            assert!(viol <= tol, "seed {seed} {mode:?}: violation {viol:e}");
        }
    }
}

#[test]
fn component_alpha_dominates_global() {
    for seed in 0..100 {
        let t = triple(seed);
        let p = partition(&t.system);
        let r = clip(&t.z, &t.v, &t.system, &p, ClipMode::Sparse, tolerance(&t.system)).unwrap();
        for a in &r.component_alphas {
            assert!(*a >= r.global_alpha, "seed {seed}");
        }
        let smallest = r.component_alphas.iter().fold(Alpha::Unbounded, |acc, &a| acc.min(a));
        assert_eq!(smallest, r.global_alpha);
    }
}

#[test]
fn single_component_sparse_equals_standard() {
    for seed in 0..50 {
        let t = triple(seed);
        let trivial = ConstraintPartition::trivial(&t.system);
        let tol = tolerance(&t.system);
        let a = clip(&t.z, &t.v, &t.system, &trivial, ClipMode::Sparse, tol).unwrap();
        let b = clip(&t.z, &t.v, &t.system, &trivial, ClipMode::Standard, tol).unwrap();
        assert_eq!(a.output, b.output, "seed {seed}");
    }
}

#[test]
fn two_component_reachability_witness() {
    let s = SparseConstraintSystem::new(2, [(0, 0, 1.0), (1, 1, 1.0)], vec![1.0, 1.0]).unwrap();
    let p = partition(&s);
    let sparse = clip(&[0.0, 0.0], &[2.0, 0.5], &s, &p, ClipMode::Sparse, 0.0).unwrap();
    let standard = clip(&[0.0, 0.0], &[2.0, 0.5], &s, &p, ClipMode::Standard, 0.0).unwrap();
    assert_eq!(sparse.output, vec![1.0, 0.5]);
    assert_eq!(standard.output, vec![1.0, 0.25]);
}

#[test]
fn chained_layers_stay_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..30 {
        let t = triple(seed);
        let p = partition(&t.system);
        let tol = tolerance(&t.system);
        let dirs: Vec<Vec<f64>> = (0..5).map(|_| gaussian(&mut rng, t.system.n())).collect();
        let out = clip_chain(&t.z, &dirs, &t.system, &p, tol).unwrap();
        assert!(t.system.max_violation(&out) <= 5.0 * tol, "seed {seed}");
    }
}

#[test]
fn clipping_is_smooth_in_z_away_from_ties() {
    // with a unique argmin per component, the output is differentiable in z;
    // central differences of two step sizes must agree
    let mut checked = 0;
    for seed in 0..100 {
        let t = triple(seed);
        let p = partition(&t.system);
        let r = clip(&t.z, &t.v, &t.system, &p, ClipMode::Sparse, 0.0).unwrap();
        let clean = r.argmins.iter().all(|a| a.len() <= 1)
            && r.alphas.iter().all(|a| !matches!(a, Alpha::Finite(v) if *v < 1e-3));
        if !clean {
            continue;
        }
        let f = |z: &[f64]| clip(z, &t.v, &t.system, &p, ClipMode::Sparse, 1e-6).unwrap().output;
        for j in 0..t.system.n() {
            let fd = |h: f64| {
                let mut a = t.z.clone();
                let mut b = t.z.clone();
                a[j] += h;
                b[j] -= h;
                f(&a).iter().zip(f(&b)).map(|(x, y)| (x - y) / (2.0 * h)).collect::<Vec<_>>()
            };
            let err = max_abs_diff(&fd(1e-6), &fd(1e-7));
            assert!(err <= 1e-4, "seed {seed} coordinate {j}: {err:e}");
        }
        checked += 1;
    }
    assert!(checked >= 20, "only {checked} clean triples");
}
