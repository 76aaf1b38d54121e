mod common;

use common::{Reference, PI};
use degenctl::hum::{null_control_nonhom, HumOptions};
use degenctl::model::{Coefficient, ControlRegion, Factor, Form, Kernel, KernelKind, SpatialGrid, TimeGrid};
use degenctl::nonlocal::{
    check_kernel_hypotheses, fixed_point_control, supported_kernel_shortcut, two_phase_control, FixedPointOptions,
    TwoPhaseOptions,
};
use degenctl::pde::{solve_forward, Problem, Stepper};
use degenctl::weights::{choose_parameters, kernel_rate, ParamOverrides, WeightSet};
use proptest::prelude::*;

fn setup(form: Form, alpha: f64, n: usize, m: usize) -> (Problem, WeightSet) {
    let coef = Coefficient::power(form, alpha);
    let grid = SpatialGrid::uniform(n).unwrap();
    let time = TimeGrid::new(1.0, m).unwrap();
    let region = ControlRegion::with_default_inner(0.3, 0.8).unwrap();
    let (w, _) = choose_parameters(&coef, &region, &grid, &time, &ParamOverrides::default()).unwrap();
    (Problem::new(coef, grid, time, region, Kernel::zero()).unwrap(), w)
}

fn sine(pb: &Problem) -> Vec<f64> {
    pb.grid.sample(|x| (PI * x).sin())
}

fn decaying(w: &WeightSet, kappa0: f64) -> (Kernel, f64) {
    let decay = kernel_rate(w) * w.params.s + 1.0;
    (Kernel::new(KernelKind::ConstantDecay { kappa0, decay }), decay)
}

#[test]
fn zero_kernel_reduces_to_the_local_control_bit_for_bit() {
    for (form, alpha) in [(Form::NonDivergence, 0.5), (Form::DivergenceStrong, 1.5)] {
        let (pb, w) = setup(form, alpha, 32, 48);
        let local = null_control_nonhom(&pb, &w, &sine(&pb), None, &HumOptions::default()).unwrap();
        let (r, trace) = fixed_point_control(&pb, &w, &sine(&pb), &FixedPointOptions::default()).unwrap();
        assert_eq!(trace.iterations(), 1);
        assert!(trace.converged);
        assert_eq!(r.control.as_slice(), local.control.as_slice());
        assert_eq!(r.state.as_slice(), local.state.as_slice());
        assert_eq!(r.final_ratio.to_bits(), local.final_ratio.to_bits());
    }
}

#[test]
fn fixed_point_state_matches_an_independent_solve() {
    let (pb0, w) = setup(Form::NonDivergence, 0.5, 40, 60);
    let (kernel, decay) = decaying(&w, 0.5);
    let pb = pb0.with_kernel(kernel).unwrap();
    let (r, trace) = fixed_point_control(&pb, &w, &sine(&pb), &FixedPointOptions::default()).unwrap();
    assert!(trace.converged && trace.all_in_ball);
    assert!(trace.hypotheses.passed);
    let k = |t: f64| {
        let rem = 1.0 - t;
        if rem <= 0.0 {
            0.0
        } else {
            0.5 * (-decay / (rem * rem)).exp()
        }
    };
    let reference = Reference::new(Form::NonDivergence, 0.5, 40, 60).forward(&sine(&pb), Some(&r.control), &k);
    let mut diff = 0.0f64;
    let mut size = 0.0f64;
    for (n, row) in reference.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            diff = diff.max((r.state.get(n, i) - v).abs());
            size = size.max(v.abs());
        }
    }
    assert!(diff <= 0.1 * size, "max difference {diff} against {size}");
    assert!(r.final_ratio <= 1e-2);
}

#[test]
fn trace_reports_contraction_and_the_ball() {
    let (pb0, w) = setup(Form::NonDivergence, 0.5, 32, 48);
    let (kernel, _) = decaying(&w, 2.0);
    let pb = pb0.with_kernel(kernel).unwrap();
    let (_, trace) = fixed_point_control(&pb, &w, &sine(&pb), &FixedPointOptions::default()).unwrap();
    assert_eq!(trace.m_bound, 4.0 * trace.records[0].weighted_norm);
    for (k, rec) in trace.records.iter().enumerate() {
        assert_eq!(rec.iteration, k + 1);
        assert_eq!(rec.in_ball, rec.weighted_norm <= trace.m_bound);
    }
    let csv = trace.to_csv();
    assert_eq!(csv.lines().count(), trace.iterations() + 1);
}

#[test]
fn iteration_cap_is_reported_not_raised() {
    let (pb0, w) = setup(Form::NonDivergence, 0.5, 32, 48);
    let (kernel, _) = decaying(&w, 2.0);
    let pb = pb0.with_kernel(kernel).unwrap();
    let opts = FixedPointOptions { fp_tol: 0.0, max_fp: 2, ..Default::default() };
    let (_, trace) = fixed_point_control(&pb, &w, &sine(&pb), &opts).unwrap();
    assert_eq!(trace.iterations(), 2);
}

#[test]
fn slowly_decaying_kernel_fails_the_hypotheses() {
    let (pb0, w) = setup(Form::NonDivergence, 0.5, 32, 48);
    let pb = pb0.with_kernel(Kernel::new(KernelKind::ConstantDecay { kappa0: 1.0, decay: 0.0 })).unwrap();
    let report = check_kernel_hypotheses(&pb, &w).unwrap();
    assert!(report.well_posed.passed);
    assert!(!report.decay.passed);
    assert!(!report.passed);
    let (kernel, _) = decaying(&w, 1.0);
    assert!(check_kernel_hypotheses(&pb0.with_kernel(kernel).unwrap(), &w).unwrap().passed);
}

#[test]
fn two_phase_control_is_comparable_to_single_phase() {
    let (pb0, w) = setup(Form::NonDivergence, 0.5, 40, 80);
    let (kernel, _) = decaying(&w, 0.5);
    let pb = pb0.with_kernel(kernel).unwrap();
    let (single, _) = fixed_point_control(&pb, &w, &sine(&pb), &FixedPointOptions::default()).unwrap();
    let two = two_phase_control(&pb, &sine(&pb), &ParamOverrides::default(), &TwoPhaseOptions::default()).unwrap();
    assert_eq!(two.switch_level, 20);
    assert!((two.switch_time - 0.25).abs() < 1e-12);
    for n in 0..two.switch_level {
        assert!(two.control.level(n).iter().all(|v| *v == 0.0), "level {n}");
    }
    // The free phase smooths the datum; the gradient at the switch is below the initial one.
    let y0 = sine(&pb);
    let grad0: f64 = (0..40).map(|i| (y0[i + 1] - y0[i]).powi(2) * 40.0).sum::<f64>().sqrt();
    assert!(two.switch_gradient_norm < grad0);
    assert!(two.final_ratio <= 1e-2, "two-phase final ratio {}", two.final_ratio);
    assert!(two.final_ratio <= 2.0 * single.final_ratio.max(1e-8), "{} vs {}", two.final_ratio, single.final_ratio);
}

#[test]
fn shortcut_reproduces_the_local_state() {
    let (pb0, w) = setup(Form::NonDivergence, 0.5, 40, 60);
    let kernel = Kernel::new(KernelKind::SeparableDecay {
        space: Factor::Bump { lo: 0.3, hi: 0.8, amp: 1.0 },
        memory: Factor::Bump { lo: 0.3, hi: 0.8, amp: 1.0 },
        decay: 0.0,
    })
    .restricted(0.3, 0.8);
    let pb = pb0.with_kernel(kernel).unwrap();
    let r = supported_kernel_shortcut(&pb, &w, &sine(&pb), &HumOptions::default()).unwrap();
    assert!(r.final_ratio <= 1e-2);
    let scale = r.local_state.max_abs();
    for (a, b) in r.state.as_slice().iter().zip(r.local_state.as_slice()) {
        assert!((a - b).abs() <= 1e-10 * scale);
    }
    for n in 0..pb.time.levels() {
        for i in 0..pb.nodes() {
            if !pb.region.contains(pb.grid.x(i)) {
                assert_eq!(r.control.get(n, i), r.local_control.get(n, i));
            }
        }
    }
    let again = solve_forward(&pb, &sine(&pb), None, Some(&r.control), Stepper::ImplicitEuler).unwrap();
    assert_eq!(again.as_slice(), r.state.as_slice());
}

#[test]
fn shortcut_needs_a_kernel_inside_the_control_set() {
    let (pb0, w) = setup(Form::NonDivergence, 0.5, 32, 48);
    let (kernel, _) = decaying(&w, 1.0);
    let pb = pb0.with_kernel(kernel).unwrap();
    assert!(supported_kernel_shortcut(&pb, &w, &sine(&pb), &HumOptions::default()).is_err());
    let wide = pb0.with_kernel(Kernel::new(KernelKind::ConstantDecay { kappa0: 1.0, decay: 0.0 }).restricted(0.1, 0.9)).unwrap();
    assert!(supported_kernel_shortcut(&wide, &w, &sine(&wide), &HumOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fixed_point_drives_small_kernels_to_rest(kappa0 in 0.05f64..2.0) {
        let (pb0, w) = setup(Form::NonDivergence, 0.5, 24, 36);
        let (kernel, _) = decaying(&w, kappa0);
        let pb = pb0.with_kernel(kernel).unwrap();
        let (r, trace) = fixed_point_control(&pb, &w, &sine(&pb), &FixedPointOptions::default()).unwrap();
        prop_assert!(trace.converged);
        prop_assert!(trace.iterations() <= 30);
        prop_assert!(r.final_ratio <= 1e-2);
    }
}
