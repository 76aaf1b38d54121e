//! Control of the nonlocal problems.
//!
//! The controlled state of `y_t - A y + int K y dtau = 1_omega u` is produced by a monitored Picard
//! iteration on the source `-int K w dtau` of the local problem. Rough data go through a free
//! smoothing phase first, and kernels supported inside the control set admit a direct construction.

use crate::error::{Error, Result};
use crate::hum::{null_control_nonhom, ControlResult, HumOptions};
use crate::model::{kernel_weighted_sup, Coefficient, Field, Kernel, KernelKind};
use crate::pde::{solve_forward, Problem, Stepper};
use crate::weights::{choose_parameters, kernel_rate, ParamOverrides, WeightSet};
use serde::{Deserialize, Serialize};

/// Tolerance for the kernel support test of the shortcut.
pub const SUPPORT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub passed: bool,
    pub value: f64,
    /// Set when the supremum was sampled on the grid.
    pub lower_bound_only: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelReport {
    /// Boundedness needed for well-posedness.
    pub well_posed: Verdict,
    /// Weighted decay near the final time needed by the fixed point.
    pub decay: Verdict,
    /// Exponential rate the decay is measured against, before multiplying by `s`.
    pub rate: f64,
    pub passed: bool,
}

fn verdict_from_bound(value: f64, finite: bool, lower_bound_only: bool, what: &str) -> Verdict {
    let note = if lower_bound_only {
        format!("{what}: sampled on the grid, lower bound only")
    } else if finite {
        format!("{what}: exact")
    } else {
        format!("{what}: unbounded")
    };
    Verdict { passed: finite, value, lower_bound_only, note }
}

/// `sup |K| e^{growth/(T-t)^2}` over `Q x (0,1)`, used by the divergence branch.
fn weighted_sup_abs(pb: &Problem, growth: f64) -> Result<Verdict> {
    let kernel = &pb.kernel;
    let horizon = pb.time.horizon();
    let x = pb.grid.nodes();
    let cut = |a: f64, b: f64| match kernel.support {
        Some((lo, hi)) if !(lo < a && a < hi && lo < b && b < hi) => 0.0,
        _ => 1.0,
    };
    let spatial_sup = |f: &dyn Fn(f64, f64) -> f64| {
        let mut m: f64 = 0.0;
        for &a in x {
            for &b in x {
                m = m.max((f(a, b) * cut(a, b)).abs());
            }
        }
        m
    };
    let analytic = |decay: f64, sup: f64| {
        let finite = sup == 0.0 || decay >= growth;
        let value = if finite { sup } else { f64::INFINITY };
        verdict_from_bound(value, finite, false, "weighted sup of |K|")
    };
    Ok(match &kernel.kind {
        KernelKind::Zero => analytic(0.0, 0.0),
        KernelKind::ConstantDecay { kappa0, decay } => analytic(*decay, spatial_sup(&|_, _| *kappa0)),
        KernelKind::SeparableDecay { space, memory, decay } => {
            analytic(*decay, spatial_sup(&|a, b| space.value(a) * memory.value(b)))
        }
        KernelKind::Tabulated(_) => {
            let mut best: f64 = 0.0;
            for n in 0..pb.time.levels() {
                let t = pb.time.t(n);
                if t >= horizon {
                    continue;
                }
                let m = kernel.matrix(t, horizon, &pb.grid)?;
                let sup = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                let r = horizon - t;
                best = best.max(sup * (growth / (r * r)).exp());
            }
            verdict_from_bound(best, best.is_finite(), true, "weighted sup of |K|")
        }
    })
}

/// Checks boundedness of the kernel and its weighted decay near `T`.
pub fn check_kernel_hypotheses(pb: &Problem, weights: &WeightSet) -> Result<KernelReport> {
    let rate = kernel_rate(weights);
    let s = weights.params.s;
    let horizon = pb.time.horizon();
    let times: Vec<f64> = (0..pb.time.levels()).map(|n| pb.time.t(n)).collect();
    let divergence = pb.coef.form.is_divergence();
    // Divergence pairings are unweighted, so the integrals use a unit coefficient.
    let pairing = if divergence { Coefficient::constant(pb.coef.form, 1.0) } else { pb.coef.clone() };
    let bounded = kernel_weighted_sup(&pb.kernel, &pairing, &pb.grid, 0.0, s, horizon, &times)?;
    let well_posed = verdict_from_bound(bounded.value, bounded.finite, bounded.lower_bound_only, "sup_t int int K^2");
    let decay = if divergence {
        weighted_sup_abs(pb, rate * s)?
    } else {
        let b = kernel_weighted_sup(&pb.kernel, &pb.coef, &pb.grid, rate, s, horizon, &times)?;
        verdict_from_bound(b.value, b.finite, b.lower_bound_only, "weighted sup_t int int K^2 / a")
    };
    let passed = well_posed.passed && decay.passed;
    Ok(KernelReport { well_posed, decay, rate, passed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedPointOptions {
    /// Relative weighted successive change that stops the iteration.
    pub fp_tol: f64,
    pub max_fp: usize,
    /// Radius of the monitored ball as a multiple of the first iterate's weighted norm.
    pub ball_factor: f64,
    pub hum: HumOptions,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { fp_tol: 1e-6, max_fp: 30, ball_factor: 4.0, hum: HumOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|e^{-s Phi~} y_k|`.
    pub weighted_norm: f64,
    /// `|e^{-s Phi~} (y_k - y_{k-1})|`.
    pub change: f64,
    pub relative_change: f64,
    /// Ratio of this change to the previous one.
    pub contraction: Option<f64>,
    pub control_norm: f64,
    /// Final ratio of the full nonlocal system driven by this iterate's control.
    pub final_ratio: f64,
    pub in_ball: bool,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub m_bound: f64,
    pub all_in_ball: bool,
    pub hypotheses: KernelReport,
}

impl FixedPointTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// One row per iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "iteration,weighted_norm,change,relative_change,contraction,control_norm,final_ratio,in_ball,cg_iterations\n",
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{},{}\n",
                r.iteration,
                r.weighted_norm,
                r.change,
                r.relative_change,
                r.contraction.map_or(String::new(), |c| format!("{c:.16e}")),
                r.control_norm,
                r.final_ratio,
                r.in_ball,
                r.cg_iterations
            ));
        }
        out
    }
}

/// `|e^{-s Phi~} y|` over the levels after the first, with clamped weights.
pub fn weighted_field_norm(pb: &Problem, w: &WeightSet, y: &Field) -> f64 {
    weighted_levels(pb, w, y).iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `sqrt(dt |cell|) e^{-s Phi~} y` for each level after the first, flattened.
fn weighted_levels(pb: &Problem, w: &WeightSet, y: &Field) -> Vec<f64> {
    let nn = pb.nodes();
    let dt = pb.time.dt();
    let mut out = vec![0.0; y.levels() * nn];
    for n in 1..y.levels() {
        let t = pb.time.t(n);
        for i in pb.op.active() {
            let v = y.get(n, i);
            if v != 0.0 {
                let e = w.log_exp_big_tilde(t, i);
                out[n * nn + i] = v.signum() * (v.abs().ln() - 0.5 * e + 0.5 * (dt * pb.op.mass[i]).ln()).exp();
            }
        }
    }
    out
}

/// Same quantity for a HUM result, from its weighted state.
fn weighted_levels_of(pb: &Problem, r: &ControlResult) -> Vec<f64> {
    let nn = pb.nodes();
    let dt = pb.time.dt();
    r.weighted_state
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let i = idx % nn;
            if idx >= nn && pb.op.is_active(i) {
                v * (dt * pb.op.mass[i]).sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Replaces the state diagnostics of `r` by a solve of the full nonlocal system.
fn verify_nonlocal(pb: &Problem, y0: &[f64], r: &mut ControlResult, stepper: Stepper) -> Result<()> {
    let state = solve_forward(pb, y0, None, Some(&r.control), stepper)?;
    let m = pb.time.steps();
    let y0n = pb.norm(y0);
    let yt = pb.norm(state.level(m));
    r.final_ratio = if y0n > 0.0 { yt / y0n } else { yt };
    let mut diff = state.clone();
    diff.as_mut_slice().iter_mut().zip(r.hum_state.as_slice()).for_each(|(a, b)| *a -= b);
    let sn = pb.field_norm(&state);
    r.discrepancy = if sn > 0.0 { pb.field_norm(&diff) / sn } else { pb.field_norm(&diff) };
    r.state = state;
    Ok(())
}

fn negated_nonlocal(pb: &Problem, w: &Field) -> Field {
    let mut f = pb.nonlocal_field(w, false);
    f.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
    f
}

/// Null control of the nonlocal problem carried by `pb` through Picard iteration on the source.
///
/// Non-convergence is reported through the trace, not as an error.
pub fn fixed_point_control(
    pb: &Problem,
    weights: &WeightSet,
    y0: &[f64],
    opts: &FixedPointOptions,
) -> Result<(ControlResult, FixedPointTrace)> {
    let hypotheses = check_kernel_hypotheses(pb, weights)?;
    let local = pb.with_kernel(Kernel::zero())?;
    let stepper = opts.hum.verify_stepper;
    let mut y0v = y0.to_vec();
    pb.op.restrict(&mut y0v);

    let free = solve_forward(pb, &y0v, None, None, stepper)?;
    let mut previous_weighted = weighted_levels(pb, weights, &free);
    let mut source = negated_nonlocal(pb, &free);
    let mut previous_source: Option<Field> = None;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut m_bound = f64::INFINITY;
    let mut converged = false;
    let mut result: Option<ControlResult> = None;

    for k in 1..=opts.max_fp.max(1) {
        if let (Some(prev), Some(_)) = (&previous_source, &result) {
            if prev.as_slice() == source.as_slice() {
                converged = true;
                break;
            }
        }
        let f = if source.as_slice().iter().all(|v| *v == 0.0) { None } else { Some(&source) };
        let mut r = null_control_nonhom(&local, weights, &y0v, f, &opts.hum)?;
        let weighted = weighted_levels_of(pb, &r);
        let norm = l2(&weighted);
        let change = l2_diff(&weighted, &previous_weighted);
        let relative_change = if norm > 0.0 { change / norm } else { change };
        if k == 1 {
            m_bound = opts.ball_factor * norm;
        }
        let contraction = records.last().and_then(|p| if p.change > 0.0 { Some(change / p.change) } else { None });
        let verified = solve_forward(pb, &y0v, None, Some(&r.control), stepper)?;
        let y0n = pb.norm(&y0v);
        let yt = pb.norm(verified.level(pb.time.steps()));
        records.push(IterationRecord {
            iteration: k,
            weighted_norm: norm,
            change,
            relative_change,
            contraction,
            control_norm: pb.field_norm(&r.control),
            final_ratio: if y0n > 0.0 { yt / y0n } else { yt },
            in_ball: norm <= m_bound,
            cg_iterations: r.cg.iterations,
        });
        let next_source = negated_nonlocal(pb, &r.hum_state);
        previous_weighted = weighted;
        previous_source = Some(std::mem::replace(&mut source, next_source));
        r.state = verified;
        result = Some(r);
        if relative_change <= opts.fp_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        if let (Some(prev), Some(_)) = (&previous_source, &result) {
            converged = prev.as_slice() == source.as_slice();
        }
    }
    let mut r = result.ok_or_else(|| Error::Config("fixed point ran no iterations".into()))?;
    verify_nonlocal(pb, &y0v, &mut r, stepper)?;
    let all_in_ball = records.iter().all(|r| r.in_ball);
    Ok((r, FixedPointTrace { records, converged, m_bound, all_in_ball, hypotheses }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoPhaseOptions {
    /// Length of the free phase as a fraction of the horizon.
    pub switch_fraction: f64,
    pub fixed_point: FixedPointOptions,
}

impl Default for TwoPhaseOptions {
    fn default() -> Self {
        Self { switch_fraction: 0.25, fixed_point: FixedPointOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct TwoPhaseResult {
    pub switch_time: f64,
    pub switch_level: usize,
    /// Discrete `H^1_0` seminorm of the state when control starts.
    pub switch_gradient_norm: f64,
    /// Control on the full time grid, zero during the free phase.
    pub control: Field,
    /// Full nonlocal state on the full time grid.
    pub state: Field,
    pub final_ratio: f64,
    pub second_phase: ControlResult,
    pub trace: FixedPointTrace,
    pub weights: WeightSet,
}

fn gradient_norm(pb: &Problem, y: &[f64]) -> f64 {
    let x = pb.grid.nodes();
    (0..x.len() - 1).map(|i| (y[i + 1] - y[i]).powi(2) / (x[i + 1] - x[i])).sum::<f64>().sqrt()
}

/// Free nonlocal evolution up to a switch time, then the fixed point on the remaining horizon with
/// weights rebuilt for it.
pub fn two_phase_control(
    pb: &Problem,
    y0: &[f64],
    overrides: &ParamOverrides,
    opts: &TwoPhaseOptions,
) -> Result<TwoPhaseResult> {
    let frac = opts.switch_fraction;
    if !(frac > 0.0 && frac < 0.5) {
        return Err(Error::Config(format!("switch fraction {frac} must lie in (0, 1/2)")));
    }
    let m = pb.time.steps();
    let dt = pb.time.dt();
    let m1 = ((m as f64) * frac).round() as usize;
    if m1 < 1 || m - m1 < 2 {
        return Err(Error::Config("time grid too coarse for two phases".into()));
    }
    let t0 = m1 as f64 * dt;
    let stepper = opts.fixed_point.hum.verify_stepper;
    let first = pb.with_time(crate::model::TimeGrid::new(t0, m1)?, pb.kernel.clone())?;
    let mut y0v = y0.to_vec();
    pb.op.restrict(&mut y0v);
    let free = solve_forward(&first, &y0v, None, None, stepper)?;
    let y_switch = free.level(m1).to_vec();
    let switch_gradient_norm = gradient_norm(pb, &y_switch);
    if !switch_gradient_norm.is_finite() {
        return Err(Error::NonFinite("state at the switch time".into()));
    }

    let rest = crate::model::TimeGrid::new(pb.time.horizon() - t0, m - m1)?;
    let second = pb.with_time(rest, pb.kernel.shifted(t0))?;
    let (weights, _) = choose_parameters(&pb.coef, &pb.region, &pb.grid, &rest, overrides)?;
    let (r, trace) = fixed_point_control(&second, &weights, &y_switch, &opts.fixed_point)?;

    let nn = pb.nodes();
    let mut control = Field::zeros(m + 1, nn);
    let mut state = Field::zeros(m + 1, nn);
    for n in 0..=m1 {
        state.level_mut(n).copy_from_slice(free.level(n));
    }
    for n in 1..=(m - m1) {
        control.level_mut(m1 + n).copy_from_slice(r.control.level(n));
        state.level_mut(m1 + n).copy_from_slice(r.state.level(n));
    }
    let y0n = pb.norm(&y0v);
    let yt = pb.norm(state.level(m));
    let final_ratio = if y0n > 0.0 { yt / y0n } else { yt };
    Ok(TwoPhaseResult {
        switch_time: t0,
        switch_level: m1,
        switch_gradient_norm,
        control,
        state,
        final_ratio,
        second_phase: r,
        trace,
        weights,
    })
}

#[derive(Debug, Clone)]
pub struct ShortcutResult {
    /// Control of the local problem.
    pub local_control: Field,
    /// Control of the nonlocal problem, `v + int K y dtau` on the control set.
    pub control: Field,
    /// State of the local controlled problem.
    pub local_state: Field,
    /// State of the nonlocal problem driven by `control`.
    pub state: Field,
    pub final_ratio: f64,
    pub local: ControlResult,
}

/// Null control for a kernel supported inside the control set, without any decay hypothesis.
///
/// The local null control `v` drives `y_t - A y = 1_omega v` to zero; with `u = v + int K y` the same
/// `y` solves the nonlocal problem, and `u - v` vanishes outside the control set because the kernel
/// does.
pub fn supported_kernel_shortcut(pb: &Problem, weights: &WeightSet, y0: &[f64], opts: &HumOptions) -> Result<ShortcutResult> {
    let (lo, hi) = (pb.region.lo, pb.region.hi);
    let times: Vec<f64> = (0..pb.time.levels()).map(|n| pb.time.t(n)).collect();
    if pb.kernel.support.is_none() {
        return Err(Error::KernelSupport("kernel carries no support restriction".into()));
    }
    if !pb.kernel.supported_in(lo, hi, &times, pb.time.horizon(), &pb.grid, SUPPORT_TOL)? {
        return Err(Error::KernelSupport(format!("kernel exceeds {SUPPORT_TOL:e} outside the control set")));
    }
    let local_pb = pb.with_kernel(Kernel::zero())?;
    let mut y0v = y0.to_vec();
    pb.op.restrict(&mut y0v);
    let local = null_control_nonhom(&local_pb, weights, &y0v, None, opts)?;
    let local_state = solve_forward(&local_pb, &y0v, None, Some(&local.control), opts.verify_stepper)?;
    let coupling = pb.nonlocal_field(&local_state, false);
    // Implicit Euler pairs the control at level n + 1 with the lagged nonlocal term at level n.
    let lag = usize::from(opts.verify_stepper == Stepper::ImplicitEuler);
    let mut control = local.control.clone();
    for n in lag..pb.time.levels() {
        let c = coupling.level(n - lag).to_vec();
        for (i, u) in control.level_mut(n).iter_mut().enumerate() {
            if pb.mask[i] > 0.0 {
                *u += c[i];
            }
        }
    }
    let state = solve_forward(pb, &y0v, None, Some(&control), opts.verify_stepper)?;
    let y0n = pb.norm(&y0v);
    let yt = pb.norm(state.level(pb.time.steps()));
    Ok(ShortcutResult {
        local_control: local.control.clone(),
        control,
        local_state,
        state,
        final_ratio: if y0n > 0.0 { yt / y0n } else { yt },
        local,
    })
}
