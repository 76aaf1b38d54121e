use degenctl::model::{Coefficient, ControlRegion, Form, SpatialGrid, TimeGrid};
use degenctl::weights::{choose_parameters, epsilon_max, nu, theta, verify_parameter_inequalities, ParamOverrides, WeightSet};
use proptest::prelude::*;

fn weights(form: Form, alpha: f64, overrides: &ParamOverrides) -> (WeightSet, TimeGrid) {
    let coef = Coefficient::power(form, alpha);
    let grid = SpatialGrid::uniform(128).unwrap();
    let time = TimeGrid::new(1.0, 64).unwrap();
    let region = ControlRegion::with_default_inner(0.3, 0.8).unwrap();
    let (w, _) = choose_parameters(&coef, &region, &grid, &time, overrides).unwrap();
    (w, time)
}

fn all_cases() -> Vec<(Form, f64)> {
    vec![(Form::NonDivergence, 0.5), (Form::NonDivergence, 1.5), (Form::DivergenceWeak, 0.5), (Form::DivergenceStrong, 1.5)]
}

#[test]
fn main_space_weight_is_increasing() {
    for (form, alpha) in all_cases() {
        let (w, _) = weights(form, alpha, &ParamOverrides::default());
        let s = w.main_space();
        assert!(s.windows(2).all(|p| p[1] > p[0]), "{form:?}");
    }
}

#[test]
fn weights_are_nonpositive_and_ordered() {
    for (form, alpha) in all_cases() {
        let (w, _) = weights(form, alpha, &ParamOverrides::default());
        for (i, (&small, &big)) in w.main_space().iter().zip(&w.big_psi).enumerate() {
            assert!(small <= big + 1e-12, "{form:?} node {i}: {small} > {big}");
            assert!(big <= 0.0, "{form:?} node {i}: {big}");
        }
    }
}

#[test]
fn extremes_match_brute_force() {
    for (form, alpha) in all_cases() {
        let (w, _) = weights(form, alpha, &ParamOverrides::default());
        let factor = w.nu(0.0);
        let hat = w.main_space().iter().map(|v| v * factor).fold(f64::NEG_INFINITY, f64::max);
        let check = w.main_space().iter().map(|v| v * factor).fold(f64::INFINITY, f64::min);
        let big_hat = w.big_psi.iter().map(|v| v * factor).fold(f64::NEG_INFINITY, f64::max);
        let big_check = w.big_psi.iter().map(|v| v * factor).fold(f64::INFINITY, f64::min);
        assert_eq!(w.main_hat(factor), hat);
        assert_eq!(w.main_check(factor), check);
        assert_eq!(w.big_hat(factor), big_hat);
        assert_eq!(w.big_check(factor), big_check);
    }
}

#[test]
fn frozen_time_factor_is_continuous_and_nondecreasing() {
    let horizon = 1.0;
    let half = 0.5 * horizon;
    assert!((nu(half - 1e-9, horizon) - nu(half + 1e-9, horizon)).abs() < 1e-5 * nu(half, horizon));
    let mut last = 0.0;
    for k in 0..1000 {
        let t = k as f64 / 1000.0;
        let v = nu(t, horizon);
        assert!(v >= last, "t = {t}");
        assert!(v <= theta(t, horizon));
        last = v;
    }
    assert!(nu(1.0, horizon).is_infinite());
}

#[test]
fn shift_budget_changes_sign_at_epsilon_max() {
    let eps = epsilon_max();
    assert!((eps - (1.0 - 2.0 * 2f64.sqrt() / 3.0).sqrt()).abs() < 1e-15);
    let budget = |e: f64| {
        let (w, time) = weights(Form::NonDivergence, 0.5, &ParamOverrides { epsilon: Some(e), ..Default::default() });
        verify_parameter_inequalities(&w, &time).nu_combination
    };
    assert!(budget(eps - 1e-3) < 0.0);
    assert!(budget(eps + 1e-3) > 0.0);
    for k in 1..20 {
        let e = eps * k as f64 / 20.0;
        assert!(budget(e) < 0.0, "epsilon {e}");
    }
}

#[test]
fn default_parameters_satisfy_all_inequalities() {
    for (form, alpha) in all_cases() {
        let (w, time) = weights(form, alpha, &ParamOverrides::default());
        let r = verify_parameter_inequalities(&w, &time);
        assert!(r.passed, "{form:?}: {r:?}");
        if form.is_divergence() {
            assert!(r.divergence_value.unwrap() < 0.0);
        } else {
            assert!(r.shift_value.unwrap() < 0.0);
            assert_eq!(r.hat_bound_ok, Some(true));
        }
    }
}

#[test]
fn log_weight_respects_the_floor() {
    let (w, _) = weights(Form::NonDivergence, 0.5, &ParamOverrides::default());
    for row in w.log_weight.rows() {
        for v in row {
            assert!(v.is_finite() && *v <= 0.0 && *v >= degenctl::weights::LOG_FLOOR);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn budget_sign_tracks_epsilon(e in 0.01f64..0.6) {
        let (w, time) = weights(Form::NonDivergence, 0.5, &ParamOverrides { epsilon: Some(e), ..Default::default() });
        let r = verify_parameter_inequalities(&w, &time);
        prop_assume!((e - epsilon_max()).abs() > 1e-9);
        prop_assert_eq!(r.nu_combination < 0.0, e < epsilon_max());
        prop_assert_eq!(r.epsilon_ok, e < epsilon_max());
    }

    #[test]
    fn time_factors_are_symmetric(t in 0.001f64..0.999) {
        prop_assert!((theta(t, 1.0) - theta(1.0 - t, 1.0)).abs() <= 1e-9 * theta(t, 1.0));
        prop_assert!(nu(t, 1.0) <= theta(t, 1.0) * (1.0 + 1e-12));
    }

    #[test]
    fn larger_s_lowers_the_weight(scale in 1.1f64..4.0) {
        let (w, _) = weights(Form::NonDivergence, 0.5, &ParamOverrides::default());
        let s = w.params.s;
        let (w2, _) = weights(Form::NonDivergence, 0.5, &ParamOverrides { s: Some(s * scale), ..Default::default() });
        for (a, b) in w.log_weight.as_slice().iter().zip(w2.log_weight.as_slice()) {
            prop_assert!(b <= a);
        }
    }
}
