mod common;

use proptest::prelude::*;
use qss_core::finite_key::{self, Direction};

use common::kato_oracle;

#[test]
fn closed_form_matches_search_at_sparse_observation() {
    for dir in [Direction::Upper, Direction::Lower] {
        let c = finite_key::kato_coeffs(100.0, 1e6, 1e-10, dir).unwrap();
        let (a, dev) = kato_oracle(100.0, 1e6, 1e-10, dir == Direction::Upper);
        assert!(
            (c.deviation - dev).abs() <= 1e-6 * dev,
            "{dir}: {} vs {dev}",
            c.deviation
        );
        assert!((c.a - a).abs() < 1e-3, "{dir}: a = {} vs {a}", c.a);
    }
}

#[test]
fn library_brute_force_agrees_with_oracle() {
    for &(lam, k) in &[(0.0, 1e4), (3.0, 1e3), (4e5, 1e6), (9.99e8, 1e9)] {
        let lib = finite_key::kato_brute_force(lam, k, 1e-10, Direction::Upper).unwrap();
        let (_, dev) = kato_oracle(lam, k, 1e-10, true);
        assert!((lib.deviation - dev).abs() <= 1e-9 * dev);
    }
}

#[test]
fn zero_observation_upper_bound() {
    let c = finite_key::kato_upper_coeffs(0.0, 1e4, 1e-10).unwrap();
    let (_, dev) = kato_oracle(0.0, 1e4, 1e-10, true);
    assert!((c.deviation - dev).abs() <= 1e-9 * dev);
    assert_eq!(
        finite_key::observed_to_expected(0.0, 1e4, 1e-10, Direction::Upper).unwrap(),
        c.deviation
    );
    assert_eq!(
        finite_key::observed_to_expected(0.0, 1e4, 1e-10, Direction::Lower).unwrap(),
        0.0
    );
}

#[test]
fn mirror_identity() {
    for &(lam, k) in &[(10.0, 1e3), (2.5e4, 1e5), (7e8, 1e9)] {
        let lo = finite_key::kato_lower_coeffs(lam, k, 1e-6).unwrap();
        let up = finite_key::kato_upper_coeffs(k - lam, k, 1e-6).unwrap();
        assert_eq!(lo.a, -up.a);
    }
}

#[test]
fn symmetric_point_is_tighter_than_a0() {
    let k = 1e6;
    let c = finite_key::kato_upper_coeffs(k / 2.0, k, 1e-10).unwrap();
    let a0 = finite_key::a0_deviation(k, 1e-10).unwrap();
    assert!(c.a < 0.0 && c.a.abs() < 0.02);
    assert!(c.deviation < a0);
    assert!((c.deviation - a0).abs() / a0 < 1e-4);
}

#[test]
fn conversion_examples() {
    let d = finite_key::a0_deviation(1e6, 1e-10).unwrap();
    assert!((d - 3393.070212207556).abs() < 1e-8);
    assert_eq!(
        finite_key::expected_to_observed(100.0, 1e6, 1e-10, Direction::Upper).unwrap(),
        100.0 + d
    );
    assert_eq!(
        finite_key::expected_to_observed(100.0, 1e6, 1e-10, Direction::Lower).unwrap(),
        0.0
    );
    assert_eq!(finite_key::a0_deviation(123.0, 1.0).unwrap(), 0.0);
    let az = finite_key::azuma_deviation(1e6, 1e-10).unwrap();
    assert_eq!(az / d, 2.0);
    assert!(finite_key::azuma_deviation(2e6, 1e-10).unwrap() > az);
    assert!(finite_key::azuma_deviation(1e6, 1e-12).unwrap() > az);
}

proptest! {
    #[test]
    fn bounds_bracket_the_observation(k in 1.0..1e9f64, frac in 0.0..=1.0f64, le in -30.0..-1.0f64) {
        let eps = le.exp();
        let lam = frac * k;
        let up = finite_key::observed_to_expected(lam, k, eps, Direction::Upper).unwrap();
        let lo = finite_key::observed_to_expected(lam, k, eps, Direction::Lower).unwrap();
        prop_assert!(lo <= lam && lam <= up);
    }

    #[test]
    fn back_substitution(k in 10.0..1e9f64, frac in 0.0..=1.0f64, le in -25.0..-2.0f64) {
        let eps = le.exp();
        for dir in [Direction::Upper, Direction::Lower] {
            let c = finite_key::kato_coeffs(frac * k, k, eps, dir).unwrap();
            prop_assert!(((c.epsilon - eps) / eps).abs() < 1e-9);
            prop_assert!(c.b >= c.a.abs());
            prop_assert!(c.deviation >= 0.0);
        }
    }
}
