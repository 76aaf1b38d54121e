use super::output::{cell, field_csv, write_json, write_text};
use super::scenario::{CoefficientSpec, Scenario};
use super::Exit;
use crate::error::{Error, Result};
use crate::hum::null_control_nonhom;
use crate::model::{validate_coefficient, Field, Kernel, SpatialGrid, TimeGrid};
use crate::nonlocal::{check_kernel_hypotheses, fixed_point_control, supported_kernel_shortcut, two_phase_control};
use crate::verify::{
    check_caccioppoli, check_carleman, check_dissipativity, check_energy_estimates, check_galerkin, check_hardy,
    check_observability, check_splitting_identity, hardy_ensemble, CarlemanOptions, CarlemanVariant, Manufactured,
};
use crate::weights::verify_parameter_inequalities;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    /// HUM when the kernel vanishes, the fixed point otherwise.
    Default,
    TwoPhase,
    Shortcut,
}

#[derive(Debug, Clone, Serialize)]
struct CheckEntry {
    name: String,
    passed: bool,
    value: Option<f64>,
    message: Option<String>,
}

impl CheckEntry {
    fn new(name: &str, passed: bool, value: Option<f64>, message: Option<String>) -> Self {
        Self { name: name.into(), passed, value, message }
    }
}

/// Coefficient, parameter and kernel checks of a scenario. Returns the report written to stdout
/// or `--out`.
pub fn cmd_validate(sc: &Scenario) -> (Exit, Value) {
    let mut checks = Vec::new();
    let mut report = serde_json::Map::new();
    let alpha = sc.alpha();
    if !sc.form.admits(alpha) {
        checks.push(CheckEntry::new(
            "coefficient",
            false,
            Some(alpha),
            Some(format!("alpha out of range: {alpha} is not admissible for the {} form", sc.form.name())),
        ));
        return finish_validate(checks, report);
    }
    let pb = match sc.problem() {
        Ok(pb) => pb,
        Err(e) => {
            checks.push(CheckEntry::new("problem", false, None, Some(e.to_string())));
            return finish_validate(checks, report);
        }
    };
    match validate_coefficient(&pb.coef, &pb.grid) {
        Ok(r) => {
            let msg = if r.violations.is_empty() { None } else { Some(r.violations.join("; ")) };
            checks.push(CheckEntry::new("coefficient", r.passed, None, msg));
            report.insert("coefficient".into(), to_value(&r));
        }
        Err(e) => checks.push(CheckEntry::new("coefficient", false, None, Some(e.to_string()))),
    }
    let w = match sc.weights(&pb) {
        Ok((w, pr)) => {
            report.insert("parameters".into(), to_value(&w.params));
            report.insert("parameter_report".into(), to_value(&pr));
            w
        }
        Err(e) => {
            checks.push(CheckEntry::new("parameters", false, None, Some(e.to_string())));
            return finish_validate(checks, report);
        }
    };
    let iq = verify_parameter_inequalities(&w, &pb.time);
    checks.push(CheckEntry::new(
        "epsilon_window",
        iq.epsilon_ok,
        Some(iq.epsilon),
        (!iq.epsilon_ok).then(|| format!("epsilon must lie in (0, {:.6})", iq.epsilon_max)),
    ));
    let budget_ok = iq.nu_combination < 0.0;
    checks.push(CheckEntry::new(
        "shift_budget",
        budget_ok,
        Some(iq.nu_combination),
        (!budget_ok).then(|| format!("8 nu(T*) - 9 nu(0) = {:+.4} must be negative", iq.nu_combination)),
    ));
    if let Some(v) = iq.shift_value {
        checks.push(CheckEntry::new("shift_exponent", v < 0.0, Some(v), None));
    }
    if let Some(ok) = iq.hat_bound_ok {
        checks.push(CheckEntry::new("hat_bound", ok, None, None));
    }
    if let Some(v) = iq.divergence_value {
        checks.push(CheckEntry::new("divergence_shift", v < 0.0, Some(v), None));
    }
    report.insert("inequalities".into(), to_value(&iq));
    if pb.has_kernel() {
        match check_kernel_hypotheses(&pb, &w) {
            Ok(k) => {
                checks.push(CheckEntry::new("kernel_bounded", k.well_posed.passed, Some(k.well_posed.value), Some(k.well_posed.note.clone())));
                checks.push(CheckEntry::new("kernel_decay", k.decay.passed, Some(k.decay.value), Some(k.decay.note.clone())));
                report.insert("kernel".into(), to_value(&k));
            }
            Err(e) => checks.push(CheckEntry::new("kernel", false, None, Some(e.to_string()))),
        }
    }
    finish_validate(checks, report)
}

fn finish_validate(checks: Vec<CheckEntry>, mut report: serde_json::Map<String, Value>) -> (Exit, Value) {
    let passed = checks.iter().all(|c| c.passed);
    report.insert("passed".into(), Value::Bool(passed));
    report.insert("checks".into(), to_value(&checks));
    (Exit::from_passed(passed), Value::Object(report))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// One control computation with everything needed for artifacts or a sweep row.
struct ControlRun {
    summary: Value,
    control: Field,
    state: Field,
    time: TimeGrid,
    grid: SpatialGrid,
    trace_csv: Option<String>,
    passed: bool,
    final_ratio: f64,
    cost: f64,
    cg_iterations: usize,
    fp_iterations: Option<usize>,
    inequalities_passed: bool,
}

fn run_control(sc: &Scenario, mode: ControlMode) -> Result<ControlRun> {
    let pb = sc.problem()?;
    let (w, preport) = sc.weights(&pb)?;
    let y0 = sc.initial(&pb.grid)?;
    let iq = verify_parameter_inequalities(&w, &pb.time);
    let threshold = sc.solver.threshold;
    let mut warnings: Vec<String> = Vec::new();
    if !iq.passed {
        warnings.push("parameter inequalities not satisfied".into());
    }
    let base = json!({
        "parameters": to_value(&w.params),
        "parameter_report": to_value(&preport),
        "inequalities": to_value(&iq),
        "threshold": threshold,
    });
    let mut summary = base.as_object().cloned().unwrap_or_default();
    let (control, state, final_ratio, cost, cg_iterations, fp_iterations, converged, trace_csv);
    match mode {
        ControlMode::Shortcut => {
            let r = supported_kernel_shortcut(&pb, &w, &y0, &sc.solver.hum())?;
            let outside = r
                .control
                .as_slice()
                .iter()
                .zip(r.local_control.as_slice())
                .enumerate()
                .filter(|(k, _)| pb.mask[k % pb.nodes()] == 0.0)
                .map(|(_, (u, v))| (u - v).abs())
                .fold(0.0, f64::max);
            summary.insert("mode".into(), json!("shortcut"));
            summary.insert("local_final_ratio".into(), json!(r.local.final_ratio));
            summary.insert("outside_difference".into(), json!(outside));
            summary.insert("fixed_point_iterations".into(), json!(0));
            summary.insert("estimate".into(), to_value(&r.local.estimate));
            (control, state, final_ratio, cost) = (r.control, r.state, r.final_ratio, r.local.cost);
            (cg_iterations, fp_iterations, converged, trace_csv) = (r.local.cg.iterations, Some(0), true, None);
        }
        ControlMode::TwoPhase => {
            let r = two_phase_control(&pb, &y0, &sc.weights, &sc.solver.two_phase())?;
            if !r.trace.hypotheses.passed {
                warnings.push("kernel hypotheses not satisfied".into());
            }
            summary.insert("mode".into(), json!("two_phase"));
            summary.insert("switch_time".into(), json!(r.switch_time));
            summary.insert("switch_gradient_norm".into(), json!(r.switch_gradient_norm));
            summary.insert("second_phase_parameters".into(), to_value(&r.weights.params));
            summary.insert("fixed_point".into(), to_value(&r.trace));
            summary.insert("estimate".into(), to_value(&r.second_phase.estimate));
            (cost, cg_iterations) = (r.second_phase.cost, r.second_phase.cg.iterations);
            (fp_iterations, converged, trace_csv) = (Some(r.trace.iterations()), r.trace.converged, Some(r.trace.to_csv()));
            (control, state, final_ratio) = (r.control, r.state, r.final_ratio);
        }
        ControlMode::Default if !pb.has_kernel() => {
            let r = null_control_nonhom(&pb, &w, &y0, None, &sc.solver.hum())?;
            summary.insert("mode".into(), json!("hum"));
            summary.insert("hum_final_ratio".into(), json!(r.hum_final_ratio));
            summary.insert("discrepancy".into(), json!(r.discrepancy));
            summary.insert("regularization".into(), json!(r.regularization));
            summary.insert("estimate".into(), to_value(&r.estimate));
            (cost, cg_iterations, fp_iterations, converged, trace_csv) = (r.cost, r.cg.iterations, None, true, None);
            (control, state, final_ratio) = (r.control, r.state, r.final_ratio);
        }
        ControlMode::Default => {
            let (r, trace) = fixed_point_control(&pb, &w, &y0, &sc.solver.fixed_point())?;
            if !trace.hypotheses.passed {
                warnings.push("kernel hypotheses not satisfied".into());
            }
            summary.insert("mode".into(), json!("fixed_point"));
            summary.insert("hum_final_ratio".into(), json!(r.hum_final_ratio));
            summary.insert("discrepancy".into(), json!(r.discrepancy));
            summary.insert("regularization".into(), json!(r.regularization));
            summary.insert("estimate".into(), to_value(&r.estimate));
            summary.insert("fixed_point".into(), to_value(&trace));
            (cost, cg_iterations) = (r.cost, r.cg.iterations);
            (fp_iterations, converged, trace_csv) = (Some(trace.iterations()), trace.converged, Some(trace.to_csv()));
            (control, state, final_ratio) = (r.control, r.state, r.final_ratio);
        }
    }
    let passed = converged && final_ratio <= threshold;
    summary.insert("final_ratio".into(), json!(final_ratio));
    summary.insert("cost".into(), json!(cost));
    summary.insert("cg_iterations".into(), json!(cg_iterations));
    summary.insert("converged".into(), json!(converged));
    summary.insert("warnings".into(), json!(warnings));
    summary.insert("passed".into(), json!(passed));
    Ok(ControlRun {
        summary: Value::Object(summary),
        control,
        state,
        time: pb.time,
        grid: pb.grid,
        trace_csv,
        passed,
        final_ratio,
        cost,
        cg_iterations,
        fp_iterations,
        inequalities_passed: iq.passed,
    })
}

/// Summary and fields of one control computation, without writing anything.
#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub summary: Value,
    pub control: Field,
    pub state: Field,
    pub passed: bool,
}

pub fn compute_control(sc: &Scenario, mode: ControlMode) -> Result<ControlOutput> {
    let run = run_control(sc, mode)?;
    Ok(ControlOutput { summary: run.summary, control: run.control, state: run.state, passed: run.passed })
}

/// Computes a control and writes `u.csv`, `y.csv`, `summary.json` and, for the fixed point,
/// `trace.csv` into `out`.
pub fn cmd_control(sc: &Scenario, mode: ControlMode, out: &Path) -> Result<(Exit, Value)> {
    let run = run_control(sc, mode)?;
    write_text(out, "u.csv", &field_csv(&run.control, &run.time, &run.grid))?;
    write_text(out, "y.csv", &field_csv(&run.state, &run.time, &run.grid))?;
    if let Some(t) = &run.trace_csv {
        write_text(out, "trace.csv", t)?;
    }
    write_json(out, "summary.json", &run.summary)?;
    Ok((Exit::from_passed(run.passed), run.summary))
}

/// Names accepted by `verify --check`.
pub const VERIFY_CHECKS: [&str; 12] = [
    "hardy",
    "splitting",
    "carleman-boundary",
    "carleman-local",
    "carleman-modified-nondiv",
    "carleman-div",
    "carleman-modified-div",
    "caccioppoli",
    "observability",
    "energy",
    "dissipativity",
    "galerkin",
];

fn carleman_variant(name: &str) -> Option<CarlemanVariant> {
    Some(match name {
        "carleman-boundary" => CarlemanVariant::Boundary,
        "carleman-local" => CarlemanVariant::Local,
        "carleman-modified-nondiv" => CarlemanVariant::ModifiedNondiv,
        "carleman-div" => CarlemanVariant::Div,
        "carleman-modified-div" => CarlemanVariant::ModifiedDiv,
        _ => return None,
    })
}

fn relative_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn refined(sc: &Scenario, space: bool, time: bool) -> Scenario {
    let mut r = sc.clone();
    if space {
        r.n *= 2;
    }
    if time {
        r.m *= 2;
    }
    r
}

/// Runs one check and returns its pass flag, JSON report and CSV table.
fn run_check(sc: &Scenario, name: &str, range: Option<(f64, f64, usize)>) -> Result<(bool, Value, String)> {
    let pb = sc.problem()?;
    let (w, _) = sc.weights(&pb)?;
    let members = sc.verify.members;
    let seed = sc.seed;
    if let Some(variant) = carleman_variant(name) {
        let opts = CarlemanOptions {
            members: members.unwrap_or(10),
            seed,
            sweep_points: sc.verify.sweep_points,
            s_mid: Some(w.params.s),
            range,
            ..Default::default()
        };
        let coarse = check_carleman(&pb, &w, variant, &opts)?;
        let fine_sc = refined(sc, true, true);
        let fine_pb = fine_sc.problem()?;
        let (fine_w, _) = fine_sc.weights(&fine_pb)?;
        let fine = check_carleman(&fine_pb, &fine_w, variant, &opts)?;
        let variation = relative_change(coarse.max_ratio, fine.max_ratio);
        let passed = coarse.passed && fine.passed && variation <= 0.2;
        let value = json!({
            "variant": variant.name(),
            "max_ratio": coarse.max_ratio,
            "refined_max_ratio": fine.max_ratio,
            "grid_variation": variation,
            "trend_nonincreasing": coarse.trend_nonincreasing,
            "report": to_value(&coarse),
            "passed": passed,
        });
        return Ok((passed, value, coarse.to_csv()));
    }
    match name {
        "hardy" => {
            let canonical = pb.grid.sample(|x| x * (1.0 - x));
            let c = check_hardy(&pb.coef, &pb.grid, &[canonical])?;
            let count = members.unwrap_or(50);
            let ens = hardy_ensemble(&pb.coef, &pb.grid, count, Some(seed))?;
            let fine = hardy_ensemble(&pb.coef, &pb.grid.refined(), count, Some(seed))?;
            let (m0, m1) = (ens.max.unwrap_or(f64::INFINITY), fine.max.unwrap_or(f64::INFINITY));
            let variation = relative_change(m0, m1);
            let passed = m0.is_finite() && m1.is_finite() && variation <= 0.1;
            let mut csv = String::from("sample,ratio\n");
            csv.push_str(&format!("canonical,{}\n", cell(c.ratios[0])));
            for (k, r) in ens.ratios.iter().enumerate() {
                csv.push_str(&format!("{k},{}\n", cell(*r)));
            }
            let value = json!({
                "canonical_ratio": c.ratios[0],
                "ensemble_max": ens.max,
                "refined_max": fine.max,
                "grid_variation": variation,
                "passed": passed,
            });
            Ok((passed, value, csv))
        }
        "splitting" => {
            let refinements = sc.verify.refinements;
            let (nodes, steps) = (sc.n >> refinements, sc.m >> refinements);
            let field = Manufactured::standard(sc.horizon);
            let r = check_splitting_identity(&field, &pb.coef, &w, w.params.s, nodes, steps, refinements)?;
            let passed = r.relative_residual() <= 0.05 && r.reduction_factors.iter().all(|f| *f >= 1.5);
            let mut csv = String::from("nodes,steps,value_left,value_right,relative_residual,boundary_term\n");
            for l in &r.levels {
                csv.push_str(&format!(
                    "{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    l.nodes, l.steps, l.value_left, l.value_right, l.relative_residual, l.boundary_term
                ));
            }
            let value = json!({
                "relative_residual": r.relative_residual(),
                "reduction_factors": r.reduction_factors,
                "slopes": r.slopes,
                "report": to_value(&r),
                "passed": passed,
            });
            Ok((passed, value, csv))
        }
        "caccioppoli" => {
            let (lo, hi) = sc.omega;
            let inner = sc.verify.inner.unwrap_or((lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)));
            let r = check_caccioppoli(&pb, &w, (lo, hi), inner, None, members.unwrap_or(10), seed)?;
            let passed = r.max_ratio.is_finite() && r.members.iter().any(|m| m.ratio.is_some());
            let mut csv = String::from("member,lhs,rhs,ratio\n");
            for m in &r.members {
                csv.push_str(&format!("{},{:.16e},{:.16e},{}\n", m.index, m.lhs, m.rhs, cell(m.ratio)));
            }
            Ok((passed, json!({ "max_ratio": r.max_ratio, "report": to_value(&r), "passed": passed }), csv))
        }
        "observability" => {
            let r = check_observability(&pb, members.unwrap_or(20), seed)?;
            let passed = r.max_ratio.is_finite() && r.weighted_ok && r.ordering_ok;
            let mut csv = String::from("member,ratio,full_ratio,weighted_ratio\n");
            for k in 0..r.ratios.len() {
                csv.push_str(&format!(
                    "{k},{},{},{}\n",
                    cell(r.ratios[k]),
                    cell(r.full_ratios[k]),
                    cell(r.weighted_ratios[k])
                ));
            }
            Ok((passed, json!({ "max_ratio": r.max_ratio, "report": to_value(&r), "passed": passed }), csv))
        }
        "energy" => {
            let count = members.unwrap_or(10);
            let stepper = sc.solver.stepper;
            let coarse = check_energy_estimates(&pb, count, Some(seed), stepper)?;
            let fine = check_energy_estimates(&refined(sc, false, true).problem()?, count, Some(seed), stepper)?;
            let variation = coarse
                .constants
                .iter()
                .zip(&fine.constants)
                .map(|(a, b)| relative_change(*a, *b))
                .fold(0.0, f64::max);
            let passed = variation <= 0.1 && coarse.dissipativity.nonincreasing;
            let mut csv = String::from("member,constant,refined_constant\n");
            for (k, (a, b)) in coarse.constants.iter().zip(&fine.constants).enumerate() {
                csv.push_str(&format!("{k},{a:.16e},{b:.16e}\n"));
            }
            let value = json!({
                "max_constant": coarse.max_constant,
                "refined_max_constant": fine.max_constant,
                "time_step_variation": variation,
                "passed": passed,
            });
            Ok((passed, value, csv))
        }
        "dissipativity" => {
            let local = pb.with_kernel(Kernel::zero())?;
            let y0 = pb.grid.sample(|x| (PI * x).sin());
            let r = check_dissipativity(&local, &y0, sc.solver.stepper, 1e-12)?;
            let mut csv = String::from("level,t,norm\n");
            for (n, v) in r.norms.iter().enumerate() {
                csv.push_str(&format!("{n},{:.16e},{v:.16e}\n", pb.time.t(n)));
            }
            let passed = r.nonincreasing;
            Ok((passed, json!({ "report": to_value(&r), "passed": passed }), csv))
        }
        "galerkin" => {
            let y0 = sc.initial(&pb.grid)?;
            let r = check_galerkin(&pb, &y0, None, None, sc.verify.modes)?;
            let passed = r.relative_difference <= 0.02;
            let mut csv = String::from("mode,eigenvalue\n");
            for (k, l) in r.eigenvalues.iter().enumerate() {
                csv.push_str(&format!("{},{l:.16e}\n", k + 1));
            }
            Ok((passed, json!({ "relative_difference": r.relative_difference, "report": to_value(&r), "passed": passed }), csv))
        }
        other => Err(Error::Config(format!("unknown check {other}"))),
    }
}

/// Runs the named checks, writing `<check>.json` and `<check>.csv` for each.
pub fn cmd_verify(sc: &Scenario, checks: &[String], range: Option<(f64, f64, usize)>, out: &Path) -> Result<(Exit, Value)> {
    let mut all = serde_json::Map::new();
    let mut passed = true;
    for name in checks {
        let (ok, value, csv) = run_check(sc, name, range)?;
        write_json(out, &format!("{name}.json"), &value)?;
        write_text(out, &format!("{name}.csv"), &csv)?;
        passed &= ok;
        all.insert(name.clone(), json!(ok));
    }
    Ok((Exit::from_passed(passed), Value::Object(all)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    S,
    Epsilon,
    Alpha,
    N,
    M,
}

impl SweepParam {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "s" => SweepParam::S,
            "epsilon" => SweepParam::Epsilon,
            "alpha" => SweepParam::Alpha,
            "n" => SweepParam::N,
            "m" => SweepParam::M,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::S => "s",
            SweepParam::Epsilon => "epsilon",
            SweepParam::Alpha => "alpha",
            SweepParam::N => "n",
            SweepParam::M => "m",
        }
    }

    fn apply(self, sc: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = sc.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{} must be a positive integer, got {value}", self.name())))
            }
        };
        match self {
            SweepParam::S => s.weights.s = Some(value),
            SweepParam::Epsilon => s.weights.epsilon = Some(value),
            SweepParam::Alpha => match &mut s.coefficient {
                CoefficientSpec::Power { alpha } => *alpha = value,
                CoefficientSpec::Table { .. } => return Err(Error::Config("alpha sweep needs a power coefficient".into())),
            },
            SweepParam::N => s.n = count()?,
            SweepParam::M => s.m = count()?,
        }
        Ok(s)
    }
}

/// Runs the control for each value, in parallel, and returns the rows in input order.
pub fn cmd_sweep(sc: &Scenario, param: SweepParam, values: &[f64], mode: ControlMode, out: &Path) -> Result<(Exit, String)> {
    let rows: Vec<(bool, String)> = values
        .par_iter()
        .map(|&v| {
            let run = param.apply(sc, v).and_then(|s| run_control(&s, mode));
            match run {
                Ok(r) => (
                    true,
                    format!(
                        "{},{v:.16e},ok,{:.16e},{:.16e},{},{},{},{}",
                        param.name(),
                        r.final_ratio,
                        r.cost,
                        r.cg_iterations,
                        r.fp_iterations.map_or(String::new(), |k| k.to_string()),
                        r.inequalities_passed,
                        r.passed
                    ),
                ),
                Err(e) => {
                    let msg = e.to_string().replace([',', '\n'], ";");
                    (false, format!("{},{v:.16e},error: {msg},,,,,,false", param.name()))
                }
            }
        })
        .collect();
    let mut csv = String::from("param,value,status,final_ratio,cost,cg_iterations,fp_iterations,inequalities_passed,passed\n");
    for (_, r) in &rows {
        csv.push_str(r);
        csv.push('\n');
    }
    write_text(out, "sweep.csv", &csv)?;
    Ok((Exit::from_passed(rows.iter().all(|(ok, _)| *ok)), csv))
}
