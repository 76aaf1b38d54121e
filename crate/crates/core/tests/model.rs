mod common;

use common::PI;
use degenctl::model::quad::{integral_over_a, integrate, plain_inner};
use degenctl::model::{
    apply_nonlocal, validate_coefficient, Coefficient, ControlRegion, Factor, Form, Kernel, KernelKind, SpatialGrid,
};
use proptest::prelude::*;

#[test]
fn trapezoid_is_exact_for_linear_integrands() {
    for grid in [SpatialGrid::uniform(17).unwrap(), SpatialGrid::clustered(33, 0.25).unwrap()] {
        let g = grid.sample(|x| 3.0 * x - 1.25);
        let v = integrate(&g, &grid);
        assert!((v - 0.25).abs() < 1e-14, "got {v}");
    }
}

#[test]
fn weighted_quadrature_converges_at_second_order() {
    // int_0^1 x^2 (1-x)^2 / x dx = 1/12.
    let coef = Coefficient::power(Form::NonDivergence, 1.0);
    let errors: Vec<f64> = [32, 64, 128, 256]
        .iter()
        .map(|&n| {
            let grid = SpatialGrid::uniform(n).unwrap();
            let g = grid.sample(|x| (x * (1.0 - x)).powi(2));
            (integral_over_a(&g, &coef, &grid, 1.0) - 1.0 / 12.0).abs()
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "observed order {order} from {errors:?}");
    }
}

#[test]
fn grids_are_ordered_and_weights_sum_to_one() {
    for grid in [SpatialGrid::uniform(40).unwrap(), SpatialGrid::clustered(40, 0.125).unwrap()] {
        let x = grid.nodes();
        assert_eq!(x[0], 0.0);
        assert_eq!(*x.last().unwrap(), 1.0);
        assert!(x.windows(2).all(|w| w[1] > w[0]));
        let total: f64 = grid.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }
    let clustered = SpatialGrid::clustered(40, 0.125).unwrap();
    assert!(clustered.h(1) < clustered.h(40));
}

#[test]
fn refined_grid_keeps_the_old_nodes() {
    let grid = SpatialGrid::clustered(20, 0.3).unwrap();
    let fine = grid.refined();
    assert_eq!(fine.cells(), 40);
    for i in 0..=20 {
        assert!((fine.x(2 * i) - grid.x(i)).abs() < 1e-15);
    }
}

#[test]
fn control_region_rejects_bad_intervals() {
    assert!(ControlRegion::new(0.3, 0.8, 0.4, 0.6).is_ok());
    assert!(ControlRegion::new(0.8, 0.3, 0.4, 0.6).is_err());
    assert!(ControlRegion::new(0.3, 0.8, 0.2, 0.6).is_err());
    let r = ControlRegion::with_default_inner(0.3, 0.8).unwrap();
    assert!(r.contains(0.5) && !r.contains(0.1) && r.inner_contains(0.55));
}

#[test]
fn coefficient_exponent_outside_the_form_range_is_rejected() {
    let grid = SpatialGrid::uniform(64).unwrap();
    let cases = [
        (Form::NonDivergence, 0.5, true),
        (Form::NonDivergence, 1.5, true),
        (Form::NonDivergence, 2.0, false),
        (Form::DivergenceWeak, 0.5, true),
        (Form::DivergenceWeak, 1.0, false),
        (Form::DivergenceStrong, 1.0, true),
        (Form::DivergenceStrong, 1.5, true),
        (Form::DivergenceStrong, 0.5, false),
    ];
    for (form, alpha, ok) in cases {
        let r = validate_coefficient(&Coefficient::power(form, alpha), &grid);
        assert_eq!(r.as_ref().map(|r| r.passed).unwrap_or(false), ok, "{form:?} alpha {alpha}: {r:?}");
    }
}

#[test]
fn tabulated_coefficient_matches_the_power_law() {
    let grid = SpatialGrid::uniform(200).unwrap();
    let x = grid.nodes().to_vec();
    let a: Vec<f64> = x.iter().map(|x| x.powf(0.5)).collect();
    let tab = Coefficient::tabulated(Form::NonDivergence, x, a, 0.5).unwrap();
    let exact = Coefficient::power(Form::NonDivergence, 0.5);
    for &t in &[0.013, 0.25, 0.5, 0.9] {
        assert!((tab.value(t) - exact.value(t)).abs() < 1e-3);
    }
    let report = validate_coefficient(&tab, &grid).unwrap();
    assert!(report.passed, "{:?}", report.violations);
}

#[test]
fn kernel_support_restriction_zeroes_outside() {
    let grid = SpatialGrid::uniform(50).unwrap();
    let k = Kernel::new(KernelKind::ConstantDecay { kappa0: 1.0, decay: 0.1 }).restricted(0.3, 0.8);
    let y = vec![1.0; grid.len()];
    let out = apply_nonlocal(&k, &y, 0.2, 1.0, &grid, false).unwrap();
    for (i, v) in out.iter().enumerate() {
        let x = grid.x(i);
        if !(0.3..=0.8).contains(&x) {
            assert_eq!(*v, 0.0, "x = {x}");
        }
    }
    assert!(out[25] > 0.0);
}

fn separable(lo: f64, hi: f64, mode: u32) -> Kernel {
    Kernel::new(KernelKind::SeparableDecay {
        space: Factor::Bump { lo, hi, amp: 1.5 },
        memory: Factor::Sine { mode, amp: 0.7 },
        decay: 0.05,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernel_transpose_is_the_adjoint(
        y in prop::collection::vec(-1.0f64..1.0, 33),
        v in prop::collection::vec(-1.0f64..1.0, 33),
        t in 0.0f64..0.95,
        lo in 0.0f64..0.4,
        width in 0.2f64..0.6,
        mode in 1u32..4,
    ) {
        let grid = SpatialGrid::uniform(32).unwrap();
        let kernels = [
            separable(lo, lo + width, mode),
            Kernel::new(KernelKind::ConstantDecay { kappa0: 0.8, decay: 0.2 }),
        ];
        for k in &kernels {
            let ky = apply_nonlocal(k, &y, t, 1.0, &grid, false).unwrap();
            let ktv = apply_nonlocal(k, &v, t, 1.0, &grid, true).unwrap();
            let lhs = plain_inner(&ky, &v, &grid);
            let rhs = plain_inner(&y, &ktv, &grid);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn nonlocal_action_is_linear(
        y in prop::collection::vec(-1.0f64..1.0, 21),
        z in prop::collection::vec(-1.0f64..1.0, 21),
        c in -3.0f64..3.0,
    ) {
        let grid = SpatialGrid::uniform(20).unwrap();
        let k = separable(0.1, 0.9, 2);
        let comb: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + c * b).collect();
        let ky = apply_nonlocal(&k, &y, 0.3, 1.0, &grid, false).unwrap();
        let kz = apply_nonlocal(&k, &z, 0.3, 1.0, &grid, false).unwrap();
        let kc = apply_nonlocal(&k, &comb, 0.3, 1.0, &grid, false).unwrap();
        for i in 0..grid.len() {
            prop_assert!((kc[i] - ky[i] - c * kz[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn admissible_exponents_validate(alpha in 0.05f64..1.95) {
        let grid = SpatialGrid::uniform(64).unwrap();
        for form in [Form::NonDivergence, Form::DivergenceWeak, Form::DivergenceStrong] {
            let r = validate_coefficient(&Coefficient::power(form, alpha), &grid);
            let passed = r.map(|r| r.passed).unwrap_or(false);
            prop_assert_eq!(passed, form.admits(alpha), "{:?} {}", form, alpha);
        }
    }

    #[test]
    fn sine_modes_are_orthogonal_in_the_plain_product(j in 1usize..6, k in 1usize..6) {
        let grid = SpatialGrid::uniform(128).unwrap();
        let a = grid.sample(|x| (j as f64 * PI * x).sin());
        let b = grid.sample(|x| (k as f64 * PI * x).sin());
        let v = plain_inner(&a, &b, &grid);
        let expected = if j == k { 0.5 } else { 0.0 };
        prop_assert!((v - expected).abs() < 1e-12);
    }
}
