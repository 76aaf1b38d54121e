//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when any fails.
//!
//! Run with `cargo test -p degenctl --test acceptance`.

mod common;

use common::{rel_change, Reference, PI};
use degenctl::hum::{null_control_nonhom, HumOptions};
use degenctl::model::{Coefficient, ControlRegion, Factor, Field, Form, Kernel, KernelKind, SpatialGrid, TimeGrid};
use degenctl::nonlocal::{fixed_point_control, supported_kernel_shortcut, FixedPointOptions};
use degenctl::pde::{galerkin_eigenbasis, Problem, Stepper};
use degenctl::verify::{
    check_caccioppoli, check_carleman, check_dissipativity, check_energy_estimates, check_galerkin, check_hardy,
    check_observability, check_splitting_identity, hardy_ensemble, CarlemanOptions, CarlemanVariant, Manufactured,
    DEFAULT_SEED,
};
use degenctl::weights::{
    choose_parameters, epsilon_max, kernel_rate, verify_parameter_inequalities, ParamOverrides, WeightSet,
};
use std::time::{Duration, Instant};

const RUNTIME_LIMIT: Duration = Duration::from_secs(60);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn setup(form: Form, alpha: f64, n: usize, m: usize, kernel: Kernel) -> (Problem, WeightSet) {
    let coef = Coefficient::power(form, alpha);
    let grid = SpatialGrid::uniform(n).unwrap();
    let time = TimeGrid::new(1.0, m).unwrap();
    let region = ControlRegion::with_default_inner(0.3, 0.8).unwrap();
    let (w, _) = choose_parameters(&coef, &region, &grid, &time, &ParamOverrides::default()).unwrap();
    (Problem::new(coef, grid, time, region, kernel).unwrap(), w)
}

fn sine(pb: &Problem) -> Vec<f64> {
    pb.grid.sample(|x| (PI * x).sin())
}

/// Final ratio of the reference forward solve driven by `u`.
fn reference_ratio(form: Form, alpha: f64, n: usize, m: usize, u: &Field, k: &dyn Fn(f64) -> f64) -> f64 {
    let r = Reference::new(form, alpha, n, m);
    let y0: Vec<f64> = (0..=n).map(|i| (PI * r.x(i)).sin()).collect();
    let traj = r.forward(&y0, Some(u), k);
    r.norm(&traj[m]) / r.norm(&y0)
}

fn hum_scenario(form: Form, alpha: f64) -> Outcome {
    let (pb, w) = setup(form, alpha, 64, 128, Kernel::zero());
    let start = Instant::now();
    let r = match null_control_nonhom(&pb, &w, &sine(&pb), None, &HumOptions::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("{form:?}: {e}")),
    };
    let elapsed = start.elapsed();
    let reference = reference_ratio(form, alpha, 64, 128, &r.control, &|_| 0.0);
    let passed = r.final_ratio <= 1e-2 && reference <= 1e-2 && elapsed <= RUNTIME_LIMIT;
    outcome(
        passed,
        format!("{form:?} a=x^{alpha}: final_ratio {:.3e}, reference {reference:.3e}, {elapsed:.2?}", r.final_ratio),
    )
}

fn criterion_1() -> Outcome {
    hum_scenario(Form::NonDivergence, 0.5)
}

fn criterion_2() -> Outcome {
    let wd = hum_scenario(Form::DivergenceWeak, 0.5);
    let sd = hum_scenario(Form::DivergenceStrong, 1.5);
    outcome(wd.passed && sd.passed, format!("{}; {}", wd.detail, sd.detail))
}

fn criterion_3() -> Outcome {
    let (pb0, w) = setup(Form::NonDivergence, 0.5, 64, 128, Kernel::zero());
    let decay = kernel_rate(&w) * w.params.s + 1.0;
    let kernel = Kernel::new(KernelKind::ConstantDecay { kappa0: 0.5, decay });
    let pb = pb0.with_kernel(kernel).unwrap();
    let (r, trace) = match fixed_point_control(&pb, &w, &sine(&pb), &FixedPointOptions::default()) {
        Ok(v) => v,
        Err(e) => return outcome(false, e.to_string()),
    };
    let last_change = trace.records.last().map_or(f64::INFINITY, |r| r.relative_change);
    let k = |t: f64| {
        let r = 1.0 - t;
        if r <= 0.0 {
            0.0
        } else {
            0.5 * (-decay / (r * r)).exp()
        }
    };
    let reference = reference_ratio(Form::NonDivergence, 0.5, 64, 128, &r.control, &k);
    let passed = trace.converged
        && trace.iterations() <= 30
        && last_change <= 1e-6
        && r.final_ratio <= 1e-2
        && reference <= 1e-2
        && trace.all_in_ball;
    outcome(
        passed,
        format!(
            "{} iterations, last change {last_change:.2e}, final_ratio {:.3e}, reference {reference:.3e}, in ball {}",
            trace.iterations(),
            r.final_ratio,
            trace.all_in_ball
        ),
    )
}

fn criterion_4() -> Outcome {
    let coef = Coefficient::power(Form::NonDivergence, 1.0);
    let grid = SpatialGrid::uniform(256).unwrap();
    // int x(1-x)^2 dx = 1/12 and int (1-2x)^2 dx = 1/3.
    let exact = (1.0 / 12.0) / (1.0 / 3.0);
    let canonical = check_hardy(&coef, &grid, &[grid.sample(|x| x * (1.0 - x))]).unwrap();
    let ratio = canonical.ratios[0].unwrap_or(f64::NAN);
    let coarse = hardy_ensemble(&coef, &grid, 50, Some(DEFAULT_SEED)).unwrap();
    let fine = hardy_ensemble(&coef, &grid.refined(), 50, Some(DEFAULT_SEED)).unwrap();
    let (m0, m1) = (coarse.max.unwrap_or(f64::NAN), fine.max.unwrap_or(f64::NAN));
    let variation = rel_change(m0, m1);
    let passed = (ratio - exact).abs() <= 1e-3 && m0.is_finite() && m1.is_finite() && variation <= 0.1;
    outcome(passed, format!("canonical {ratio:.6} (exact {exact}), ensemble max {m0:.5} -> {m1:.5}, variation {variation:.2e}"))
}

fn criterion_5() -> Outcome {
    let (pb, w) = setup(Form::NonDivergence, 1.0, 128, 256, Kernel::zero());
    let field = Manufactured::standard(1.0);
    let r = check_splitting_identity(&field, &pb.coef, &w, w.params.s, 32, 64, 2).unwrap();
    let finest = r.levels.last().unwrap();
    let passed = finest.nodes == 128
        && finest.steps == 256
        && r.relative_residual() <= 0.05
        && r.reduction_factors.iter().all(|f| *f >= 1.5);
    outcome(passed, format!("residual {:.3e} at n=128 m=256, reduction factors {:?}", r.relative_residual(), r.reduction_factors))
}

fn criterion_6() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (form, alpha) in [(Form::NonDivergence, 0.5), (Form::DivergenceWeak, 0.5), (Form::DivergenceStrong, 1.5)] {
        let (pb, w) = setup(form, alpha, 64, 128, Kernel::zero());
        let (pb2, w2) = setup(form, alpha, 128, 256, Kernel::zero());
        let opts = CarlemanOptions { members: 10, s_mid: Some(w.params.s), ..Default::default() };
        for v in CarlemanVariant::all().into_iter().filter(|v| v.is_divergence() == form.is_divergence()) {
            let coarse = check_carleman(&pb, &w, v, &opts).unwrap();
            let fine = check_carleman(&pb2, &w2, v, &opts).unwrap();
            let variation = rel_change(coarse.max_ratio, fine.max_ratio);
            let ok = coarse.max_ratio.is_finite()
                && coarse.max_ratio > 0.0
                && coarse.trend_nonincreasing
                && fine.trend_nonincreasing
                && variation <= 0.2;
            passed &= ok;
            parts.push(format!("{}/{}: max {:.2e} var {:.1}%", form.name(), v.name(), coarse.max_ratio, 100.0 * variation));
        }
    }
    let (pb, w) = setup(Form::NonDivergence, 0.5, 64, 128, Kernel::zero());
    let c = check_caccioppoli(&pb, &w, (0.3, 0.8), (0.425, 0.675), None, 10, DEFAULT_SEED).unwrap();
    passed &= c.max_ratio.is_finite() && c.max_ratio > 0.0;
    parts.push(format!("caccioppoli max {:.2e}", c.max_ratio));
    outcome(passed, parts.join("; "))
}

fn criterion_7() -> Outcome {
    let eps_formula = (1.0 - 2.0 * 2f64.sqrt() / 3.0).sqrt();
    let eps_ok = (epsilon_max() - eps_formula).abs() <= 1e-12 && (epsilon_max() - 0.2391).abs() <= 1e-4;
    // 8 theta(T*) - 9 theta(T/2) with T = 1 and T* = (1 + eps)/2.
    let budget = |eps: f64| {
        let t = 0.5 * (1.0 + eps);
        8.0 / (t * (1.0 - t)).powi(2) - 9.0 * 16.0
    };
    let with_eps = |eps: f64| {
        let (pb, _) = setup(Form::NonDivergence, 0.5, 64, 128, Kernel::zero());
        let ov = ParamOverrides { epsilon: Some(eps), ..Default::default() };
        let (w, _) = choose_parameters(&pb.coef, &pb.region, &pb.grid, &pb.time, &ov).unwrap();
        verify_parameter_inequalities(&w, &pb.time).nu_combination
    };
    let (v2, v3) = (with_eps(0.2), with_eps(0.3));
    let lemma_ok = v2 < 0.0 && v3 > 0.0 && (v2 - budget(0.2)).abs() <= 1e-9 && (v3 - budget(0.3)).abs() <= 1e-9;
    let mut div_ok = true;
    let mut div_values = Vec::new();
    for (form, alpha) in [(Form::DivergenceWeak, 0.5), (Form::DivergenceStrong, 1.5)] {
        let (pb, w) = setup(form, alpha, 64, 128, Kernel::zero());
        let v = verify_parameter_inequalities(&w, &pb.time).divergence_value.unwrap_or(f64::NAN);
        div_ok &= v < 0.0;
        div_values.push(format!("{v:.3e}"));
    }
    outcome(
        eps_ok && lemma_ok && div_ok,
        format!(
            "eps_max {:.6}, budget(0.2) {v2:.4}, budget(0.3) {v3:+.4}, divergence checks {}",
            epsilon_max(),
            div_values.join(", ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let (pb, _) = setup(Form::NonDivergence, 0.5, 128, 256, Kernel::zero());
    let f = Field::from_fn(&pb.time, &pb.grid, |t, x| (2.0 * PI * x).sin() * (PI * t).cos());
    let r = check_galerkin(&pb, &sine(&pb), Some(&f), None, 32).unwrap();
    let flat = Problem::new(
        Coefficient::constant(Form::NonDivergence, 1.0),
        SpatialGrid::uniform(128).unwrap(),
        TimeGrid::new(1.0, 8).unwrap(),
        ControlRegion::with_default_inner(0.3, 0.8).unwrap(),
        Kernel::zero(),
    )
    .unwrap();
    let basis = galerkin_eigenbasis(&flat, 5).unwrap();
    let worst = (1..=5).map(|k| rel_change(basis.eigenvalues[k - 1], (k as f64 * PI).powi(2))).fold(0.0, f64::max);
    outcome(
        r.relative_difference <= 0.02 && worst <= 0.01,
        format!("modal vs finite difference {:.3e}, worst eigenvalue error {worst:.3e}", r.relative_difference),
    )
}

fn criterion_9() -> Outcome {
    let (pb, _) = setup(Form::NonDivergence, 0.5, 64, 128, Kernel::zero());
    let r = check_observability(&pb, 20, DEFAULT_SEED).unwrap();
    let bound = 1.0 / pb.time.horizon();
    let weighted_ok = r.weighted_ratios.iter().all(|v| v.is_some_and(|v| v <= bound));
    let passed = r.max_ratio.is_finite() && r.max_ratio > 0.0 && weighted_ok && r.weighted_ok && r.ordering_ok;
    outcome(passed, format!("max ratio {:.3e}, weighted bound 1/T held member-wise: {weighted_ok}", r.max_ratio))
}

fn criterion_10() -> Outcome {
    let (pb, _) = setup(Form::NonDivergence, 0.5, 64, 128, Kernel::zero());
    let y0 = sine(&pb);
    let d = check_dissipativity(&pb, &y0, Stepper::ImplicitEuler, 1e-12).unwrap();
    let reference = Reference::new(Form::NonDivergence, 0.5, 64, 128);
    let traj = reference.forward(&y0, None, &|_| 0.0);
    let ref_norms: Vec<f64> = traj.iter().map(|y| reference.norm(y)).collect();
    let ref_ok = ref_norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let agree = d.norms.iter().zip(&ref_norms).all(|(a, b)| rel_change(*a, *b) <= 1e-10);
    let coarse = check_energy_estimates(&pb, 10, Some(DEFAULT_SEED), Stepper::ImplicitEuler).unwrap();
    let (pb2, _) = setup(Form::NonDivergence, 0.5, 64, 256, Kernel::zero());
    let fine = check_energy_estimates(&pb2, 10, Some(DEFAULT_SEED), Stepper::ImplicitEuler).unwrap();
    let variation = coarse.constants.iter().zip(&fine.constants).map(|(a, b)| rel_change(*a, *b)).fold(0.0, f64::max);
    let passed = d.nonincreasing && ref_ok && agree && variation <= 0.1;
    outcome(
        passed,
        format!(
            "norms nonincreasing {}, matches reference {agree}, energy constant {:.4} -> {:.4} (max member change {variation:.2e})",
            d.nonincreasing, coarse.max_constant, fine.max_constant
        ),
    )
}

fn criterion_11() -> Outcome {
    let bump = Factor::Bump { lo: 0.35, hi: 0.75, amp: 3.0 };
    let kernel = Kernel::new(KernelKind::SeparableDecay { space: bump.clone(), memory: bump, decay: 0.0 }).restricted(0.3, 0.8);
    let (pb, w) = setup(Form::NonDivergence, 0.5, 64, 128, kernel);
    let r = match supported_kernel_shortcut(&pb, &w, &sine(&pb), &HumOptions::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let nodes = pb.nodes();
    let mut outside: f64 = 0.0;
    for (k, (u, v)) in r.control.as_slice().iter().zip(r.local_control.as_slice()).enumerate() {
        let x = pb.grid.x(k % nodes);
        if !(0.3 < x && x < 0.8) {
            outside = outside.max((u - v).abs());
        }
    }
    let passed = r.final_ratio <= 1e-2 && outside == 0.0;
    outcome(passed, format!("no fixed-point iterations, final_ratio {:.3e}, max |u - v| outside omega {outside:e}", r.final_ratio))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 null control, non-divergence", criterion_1),
        ("2 null control, divergence WD/SD", criterion_2),
        ("3 nonlocal fixed point", criterion_3),
        ("4 Hardy-Poincare", criterion_4),
        ("5 splitting identity", criterion_5),
        ("6 Carleman checkers", criterion_6),
        ("7 parameter budget", criterion_7),
        ("8 Galerkin cross-validation", criterion_8),
        ("9 observability", criterion_9),
        ("10 dissipativity and energy", criterion_10),
        ("11 supported-kernel shortcut", criterion_11),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!("{} criterion {name}: {} [{:.2?}]", if o.passed { "PASS" } else { "FAIL" }, o.detail, start.elapsed());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
