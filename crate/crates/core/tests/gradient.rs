mod common;

use cadproj::gradient::{exact_jacobian, finite_difference_jacobian, penalty, surrogate_jacobian, JacobianOperator};
use cadproj::oracle::project_bruteforce;
use cadproj::{Algorithm, GradientError, Projector, SolverConfig, SparseConstraintSystem};
use common::{dot, gaussian, max_abs_diff, norm, orthogonal, small_case};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tight(system: &SparseConstraintSystem) -> Projector<'_> {
    Projector::new(
        system,
        SolverConfig::new(Algorithm::CadScaled, 1e-12).with_max_iterations(1_000_000),
    )
    .unwrap()
}

/// An infeasible point with a clean active set, or `None` after a few
/// perturbations.
fn differentiable_case(seed: u64) -> Option<(SparseConstraintSystem, Vec<f64>, JacobianOperator)> {
    let (s, x) = small_case(seed, 6, 6);
    let p = tight(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = x;
    for _ in 0..5 {
        match exact_jacobian(&x, &p) {
            Ok(j) if j.direction().is_some() => return Some((s.clone(), x, j)),
            Ok(_) => return None,
            Err(GradientError::AmbiguousActiveSet { .. }) => {
                for (xi, e) in x.iter_mut().zip(gaussian(&mut rng, s.n())) {
                    *xi += 1e-4 * e;
                }
            }
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    None
}

fn operator_distance(a: &JacobianOperator, b: &JacobianOperator) -> f64 {
    let (da, db) = (a.to_dense(), b.to_dense());
    da.iter().zip(&db).map(|(r, s)| max_abs_diff(r, s)).fold(0.0, f64::max)
}

#[test]
fn surrogate_rank_is_n_minus_one_outside() {
    let mut checked = 0;
    for seed in 0..200 {
        let (s, x) = small_case(seed, 8, 6);
        let p = tight(&s);
        let j = surrogate_jacobian(&x, &p).unwrap();
        let expected = if j.direction().is_some() { s.n() - 1 } else { s.n() };
        assert_eq!(j.rank(), expected, "seed {seed}");
        if j.direction().is_some() {
            checked += 1;
        }
        if checked == 50 {
            break;
        }
    }
    assert_eq!(checked, 50);
}

#[test]
fn exact_matches_finite_differences() {
    let mut checked = 0;
    for seed in 0..400 {
        let Some((s, x, j)) = differentiable_case(seed) else { continue };
        let fd = finite_difference_jacobian(&x, &tight(&s), 1e-6).unwrap();
        let dense = j.to_dense();
        let err = dense.iter().zip(&fd).map(|(a, b)| max_abs_diff(a, b)).fold(0.0, f64::max);
        assert!(err <= 1e-5, "seed {seed}: error {err:e}, active {:?}", j.active_set());
        checked += 1;
        if checked == 100 {
            break;
        }
    }
    assert_eq!(checked, 100);
}

#[test]
fn alignment_and_projection_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    for seed in 1000..1400 {
        let Some((s, x, exact)) = differentiable_case(seed) else { continue };
        let surrogate = surrogate_jacobian(&x, &tight(&s)).unwrap();
        let v = gaussian(&mut rng, s.n());
        let e = exact.apply(&v);
        let g = surrogate.apply(&v);
        assert!((dot(&e, &g) - dot(&e, &e)).abs() <= 1e-8, "seed {seed}");
        for op in [&exact, &surrogate] {
            let once = op.apply(&v);
            assert!(max_abs_diff(&op.apply(&once), &once) <= 1e-8, "idempotence, seed {seed}");
            let w = gaussian(&mut rng, s.n());
            assert!((dot(&op.apply(&v), &w) - dot(&v, &op.apply(&w))).abs() <= 1e-8, "symmetry, seed {seed}");
        }
        checked += 1;
        if checked == 100 {
            break;
        }
    }
    assert_eq!(checked, 100);
}

#[test]
fn exact_equals_surrogate_iff_single_active() {
    let (mut single, mut multi) = (0, 0);
    for seed in 2000..2400 {
        let Some((s, x, exact)) = differentiable_case(seed) else { continue };
        let surrogate = surrogate_jacobian(&x, &tight(&s)).unwrap();
        let dist = operator_distance(&exact, &surrogate);
        if exact.active_set().len() == 1 {
            assert!(dist <= 1e-8, "seed {seed}: {dist:e}");
            single += 1;
        } else {
            assert!(dist > 1e-8, "seed {seed}: {dist:e}");
            multi += 1;
        }
    }
    assert!(single > 10 && multi > 10, "{single} single, {multi} multi");
    // interior points: both are the identity
    let (s, _) = small_case(3, 6, 6);
    let (_, w) = cadproj::probgen::gen_constraints_with_witness(
        &cadproj::probgen::GeneratorConfig::new(s.n(), s.m(), 3, 3),
    )
    .unwrap();
    let p = tight(&s);
    assert_eq!(exact_jacobian(&w, &p).unwrap().rank(), s.n());
    assert_eq!(surrogate_jacobian(&w, &p).unwrap().rank(), s.n());
}

fn oracle_active(x: &[f64], s: &SparseConstraintSystem) -> Vec<usize> {
    project_bruteforce(x, s, &vec![1.0; s.n()]).unwrap().active_set
}

#[test]
fn local_gradient_steps_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for seed in 3000..3400 {
        let Some((s, x, exact)) = differentiable_case(seed) else { continue };
        let surrogate = JacobianOperator::surrogate_from_projection(&x, exact.projected_point());
        let active = oracle_active(&x, &s);
        let dir = gaussian(&mut rng, s.n());
        let dir: Vec<f64> = dir.iter().map(|v| v / norm(&dir)).collect();
        // shrink until both steps keep the active set
        let mut beta = 1.0;
        let steps = loop {
            let v: Vec<f64> = dir.iter().map(|d| beta * d).collect();
            let a: Vec<f64> = x.iter().zip(exact.apply(&v)).map(|(x, e)| x + e).collect();
            let b: Vec<f64> = x.iter().zip(surrogate.apply(&v)).map(|(x, e)| x + e).collect();
            if oracle_active(&a, &s) == active && oracle_active(&b, &s) == active {
                break Some((a, b));
            }
            beta /= 2.0;
            if beta < 1e-8 {
                break None;
            }
        };
        let Some((a, b)) = steps else { continue };
        let err = max_abs_diff(&orthogonal(&a, &s), &orthogonal(&b, &s));
        assert!(err <= 1e-6, "seed {seed}: {err:e}");
        checked += 1;
        if checked == 100 {
            break;
        }
    }
    assert_eq!(checked, 100);
}

#[test]
fn hypercube_corner_exact_rank_zero() {
    for n in 2..=5 {
        let triplets = (0..n).flat_map(|j| [(2 * j, j, 1.0), (2 * j + 1, j, -1.0)]);
        let b = (0..2 * n).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let s = SparseConstraintSystem::new(n, triplets, b).unwrap();
        let p = tight(&s);
        let x = vec![2.0; n];
        assert_eq!(exact_jacobian(&x, &p).unwrap().rank(), 0);
        assert_eq!(surrogate_jacobian(&x, &p).unwrap().rank(), n - 1);
    }
}

#[test]
fn penalty_gradient_matches_finite_differences() {
    for seed in 0..30 {
        let (s, x) = small_case(4000 + seed, 6, 6);
        let value = |w: &[f64]| penalty(w, &orthogonal(w, &s)).0;
        let (_, grad) = penalty(&x, &orthogonal(&x, &s));
        let h = 1e-6;
        for j in 0..x.len() {
            let mut a = x.clone();
            let mut b = x.clone();
            a[j] += h;
            b[j] -= h;
            let fd = (value(&a) - value(&b)) / (2.0 * h);
            assert!((fd - grad[j]).abs() <= 1e-5, "seed {seed} coordinate {j}");
        }
    }
}
