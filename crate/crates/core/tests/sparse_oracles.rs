use kehmode::Mode;
use kehmode::sparse::{
    bpdn_solve, ksvd_train, omp, BpdnConfig, ClassDictionary, KsvdConfig, StackedDictionary,
};
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

mod common;
use common::*;

#[test]
fn bpdn_matches_exhaustive_support_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..100 {
        let m = rng.random_range(2..=6);
        let n = rng.random_range(m..=12);
        let a = unit_columns(gaussian_matrix(&mut rng, m, n));
        let k = rng.random_range(1..=3.min(m));
        let mut x0 = DVector::zeros(n);
        for j in sample(&mut rng, n, k) {
            x0[j] = rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
        let noise = DVector::from_fn(m, |_, _| { let z: f64 = StandardNormal.sample(&mut rng); 0.05 * z });
        let y = &a * &x0 + noise;
        let eps = rng.random_range(0.02..0.5) * y.norm();

        let sol = bpdn_solve(&a, &y, eps, &BpdnConfig::default()).unwrap();
        let got = sol.code.l1_norm();
        let want = oracle_bpdn(&a, &y, eps);
        assert!(sol.residual_norm <= eps * (1.0 + 1e-9), "case {case}: residual {} > {eps}", sol.residual_norm);
        assert!((got - want).abs() <= 1e-4 * want.max(1.0), "case {case}: {got} vs {want}");
    }
}

#[test]
fn bpdn_zero_when_signal_within_tolerance() {
    let a = DMatrix::<f64>::identity(3, 3);
    let y = DVector::from_vec(vec![0.1, 0.0, 0.0]);
    let sol = bpdn_solve(&a, &y, 0.2, &BpdnConfig::default()).unwrap();
    assert!(sol.code.support.is_empty());
}

#[test]
fn omp_recovers_supports_on_orthonormal_dictionaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..200 {
        let m = rng.random_range(2..10);
        let q = random_orthonormal(&mut rng, m);
        let k = rng.random_range(1..=m);
        let mut support: Vec<usize> = sample(&mut rng, m, k).into_vec();
        support.sort_unstable();
        let mut x0 = DVector::zeros(m);
        for j in &support {
            x0[*j] = rng.random_range(0.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
        let y = &q * &x0;
        let r = omp(&q, &y, k, 0.0).unwrap();
        let mut got = r.code.support.clone();
        got.sort_unstable();
        assert_eq!(got, support);
        for j in 0..m {
            assert!((r.code.coefficients[j] - x0[j]).abs() < 1e-10);
        }
        assert!(r.residual_norm < 1e-10);
    }
}

#[test]
fn omp_documented_cases() {
    let q = DMatrix::<f64>::identity(4, 4);
    let y = DVector::from_vec(vec![2.0, 3.0, 0.0, 0.0]);
    let r = omp(&q, &y, 2, 0.0).unwrap();
    assert_eq!(r.code.coefficients, vec![2.0, 3.0, 0.0, 0.0]);

    let d = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let y = DVector::from_vec(vec![0.0, 0.0, 5.0]);
    let r = omp(&d, &y, 2, 0.0).unwrap();
    assert!(r.code.support.is_empty());
    assert_eq!(r.residual_norm, 5.0);
}

#[test]
fn ksvd_update_stage_never_increases_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let data = gaussian_matrix(&mut rng, 8, 40);
    let cfg = KsvdConfig { atoms: 16, sparsity: 3, iterations: 30, ..KsvdConfig::default() };
    let out = ksvd_train(&data, &cfg).unwrap();
    assert_eq!(out.history.len(), 30);
    for (i, h) in out.history.iter().enumerate() {
        assert!(
            h.after_update <= h.before_update * (1.0 + 1e-12) + 1e-12,
            "iteration {i}: {} > {}",
            h.after_update,
            h.before_update
        );
    }
    for c in out.atoms.column_iter() {
        assert!((c.norm() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn ksvd_fixed_point_on_orthonormal_training_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let q = random_orthonormal(&mut rng, 6);
    let cfg = KsvdConfig { atoms: 6, sparsity: 1, iterations: 5, ..KsvdConfig::default() };
    let out = ksvd_train(&q, &cfg).unwrap();
    assert!((&q - &out.atoms * &out.codes).norm() < 1e-10);
    // every learned atom is ± one of the training columns
    for a in out.atoms.column_iter() {
        assert!(q.column_iter().any(|c| (c.dot(&a).abs() - 1.0).abs() < 1e-10));
    }
}

#[test]
fn ksvd_zero_iterations_returns_normalized_first_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let data = gaussian_matrix(&mut rng, 5, 12);
    let cfg = KsvdConfig { atoms: 4, sparsity: 2, iterations: 0, ..KsvdConfig::default() };
    let out = ksvd_train(&data, &cfg).unwrap();
    for j in 0..4 {
        let c = data.column(j);
        assert!((out.atoms.column(j) - c / c.norm()).norm() < 1e-12);
    }
}

#[test]
fn stacked_dictionary_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let parts: Vec<ClassDictionary> = [Mode::Bus, Mode::Ferry]
        .iter()
        .map(|m| ClassDictionary {
            atoms: unit_columns(gaussian_matrix(&mut rng, 4, 3)),
            class_id: *m,
        })
        .collect();
    let d = StackedDictionary::stack(&parts).unwrap();
    let json = serde_json::to_string(&d).unwrap();
    let back: StackedDictionary = serde_json::from_str(&json).unwrap();
    assert_eq!(back, d);
}
