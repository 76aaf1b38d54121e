use super::cg::{pcg, CgOutcome};
use super::kappa::{Kappa, MIN_REGULARIZATION};
use crate::error::{Error, Result};
use crate::model::Field;
use crate::pde::{solve_forward, Problem, Stepper};
use crate::weights::WeightSet;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumOptions {
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Time stepper of the independent forward verification.
    pub verify_stepper: Stepper,
    /// First Tikhonov shift on the scaled dual system; raised tenfold on breakdown.
    pub regularization: f64,
    pub max_regularization: f64,
}

impl Default for HumOptions {
    fn default() -> Self {
        Self {
            cg_tol: 1e-8,
            cg_max_iter: 5000,
            verify_stepper: Stepper::ImplicitEuler,
            regularization: MIN_REGULARIZATION,
            max_regularization: 1e-8,
        }
    }
}

/// Both sides of the weighted estimate, without the unknown constant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EstimateSides {
    /// `J(y, u)`.
    pub lhs: f64,
    /// `e^{2s[hat(0) - check(T*)]} (|f e^{-s phi~}|^2 + |y0 e^{-s hat(0)}|^2)`.
    pub rhs: f64,
    pub source_term: f64,
    pub initial_term: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone)]
pub struct ControlResult {
    /// Control on the time levels, zero outside the control set.
    pub control: Field,
    /// State predicted by the dual solution.
    pub hum_state: Field,
    /// State from an independent forward solve with the computed control.
    pub state: Field,
    /// Dual minimiser.
    pub dual: Field,
    /// `e^{-s Phi~} y` at the time levels, zero at the initial level.
    pub weighted_state: Vec<f64>,
    pub final_ratio: f64,
    pub hum_final_ratio: f64,
    /// Relative space-time gap between the predicted and the re-solved state.
    pub discrepancy: f64,
    pub cg: CgOutcome,
    /// Tikhonov shift that was needed on the scaled dual system.
    pub regularization: f64,
    pub cost: f64,
    pub estimate: EstimateSides,
}

/// Weighted norm `|f e^{-s phi~}|^2` in the natural space, infinite when it cannot be represented.
pub fn weighted_source_norm_sq(pb: &Problem, w: &WeightSet, f: &Field) -> f64 {
    let time = &pb.time;
    let space = w.main_space();
    let s = w.params.s;
    let mut total = 0.0;
    for n in 0..time.levels() {
        let nu = w.nu(time.t(n));
        for i in pb.op.active() {
            let v = f.get(n, i);
            if v == 0.0 {
                continue;
            }
            if !nu.is_finite() {
                return f64::INFINITY;
            }
            let e = 2.0 * v.abs().ln() - 2.0 * s * nu * space[i];
            total += time.weight(n) * pb.op.mass[i] * e.exp();
        }
    }
    total
}

/// Penalised-HUM null control of `y_t - A y = f + 1_omega u`, `y(0) = y0`.
pub fn null_control_nonhom(
    pb: &Problem,
    weights: &WeightSet,
    y0: &[f64],
    f: Option<&Field>,
    opts: &HumOptions,
) -> Result<ControlResult> {
    let time = &pb.time;
    let (nn, m) = (pb.nodes(), time.steps());
    if y0.len() != nn {
        return Err(Error::ShapeMismatch("initial datum length".into()));
    }
    if let Some(f) = f {
        f.check_shape(time, &pb.grid, "source")?;
        let norm = weighted_source_norm_sq(pb, weights, f);
        if !norm.is_finite() {
            return Err(Error::InfiniteWeightedNorm(format!("|f e^(-s phi)|^2 = {norm}")));
        }
    }
    let mut y0v = y0.to_vec();
    pb.op.restrict(&mut y0v);

    let (kappa, cg) = solve_dual(pb, weights, &y0v, f, opts)?;
    let dual = kappa.dual_from_scaled(&cg.solution);
    if dual.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dual solution".into()));
    }
    let to_field = |v: Vec<f64>| Field::from_rows(v.chunks(nn).map(|c| c.to_vec()).collect());
    let dual_field = to_field(dual)?;
    let control = to_field(kappa.control_from_scaled(&cg.solution))?;
    let (weighted_state, predicted) = kappa.states_from_scaled(&cg.solution);
    let mut hum_state = to_field(predicted)?;
    hum_state.level_mut(0).copy_from_slice(&y0v);

    let state = solve_forward(pb, &y0v, f, Some(&control), opts.verify_stepper)?;
    let y0n = pb.norm(&y0v);
    let ratio = |y: &[f64]| if y0n > 0.0 { pb.norm(y) / y0n } else { pb.norm(y) };
    let final_ratio = ratio(state.level(m));
    let hum_final_ratio = ratio(hum_state.level(m));
    let diff = {
        let mut d = state.clone();
        d.as_mut_slice().iter_mut().zip(hum_state.as_slice()).for_each(|(a, b)| *a -= b);
        d
    };
    let sn = pb.field_norm(&state);
    let discrepancy = if sn > 0.0 { pb.field_norm(&diff) / sn } else { pb.field_norm(&diff) };

    let cost = kappa.energy_scaled(&cg.solution);
    let estimate = estimate_sides(pb, weights, &y0v, f, cost);
    Ok(ControlResult {
        control,
        hum_state,
        state,
        dual: dual_field,
        weighted_state,
        final_ratio,
        hum_final_ratio,
        discrepancy,
        regularization: kappa.regularization(),
        cg,
        cost,
        estimate,
    })
}

/// Solves the scaled dual system, raising the regularisation until the factorisation and the
/// iteration both succeed.
fn solve_dual<'a>(
    pb: &'a Problem,
    weights: &'a WeightSet,
    y0: &[f64],
    f: Option<&Field>,
    opts: &HumOptions,
) -> Result<(Kappa<'a>, CgOutcome)> {
    let mut delta = opts.regularization;
    loop {
        let attempt = Kappa::with_regularization(pb, weights, delta).and_then(|kappa| {
            if kappa.factorization_failed() {
                return Err(Error::SingularSystem { row: 0 });
            }
            let bs = kappa.scale(&kappa.ell(y0, f));
            let cg = pcg(
                |z| kappa.apply_scaled(z),
                |r| kappa.precondition(r),
                &bs,
                opts.cg_tol,
                opts.cg_max_iter,
                |_| {},
            )?;
            Ok((kappa, cg))
        });
        match attempt {
            Ok(done) => return Ok(done),
            Err(e) if delta * 10.0 <= opts.max_regularization * (1.0 + 1e-9) => {
                let _ = e;
                delta *= 10.0;
            }
            Err(e) => return Err(e),
        }
    }
}

fn estimate_sides(pb: &Problem, w: &WeightSet, y0: &[f64], f: Option<&Field>, lhs: f64) -> EstimateSides {
    let s = w.params.s;
    let exponent = w.estimate_exponent();
    let hat0 = w.main_hat(w.nu(0.0));
    let initial_term = pb.op.inner(y0, y0) * (-2.0 * s * hat0).exp();
    let source_term = f.map_or(0.0, |f| weighted_source_norm_sq(pb, w, f));
    let rhs = exponent.exp() * (source_term + initial_term);
    EstimateSides { lhs, rhs, source_term, initial_term, exponent }
}

/// Cost `J(y, u) = int int y^2 e^{-2 s Phi~} + int int_omega s^{-3} nu^{-3} u^2 e^{-2 s Phi~}`.
///
/// Both fields live on the time levels; the time quadrature is the right-endpoint rule matching the
/// implicit Euler scheme, and pairings use the natural space of the form.
pub fn evaluate_cost(pb: &Problem, w: &WeightSet, y: &Field, u: &Field) -> f64 {
    let time = &pb.time;
    let s = w.params.s;
    let dt = time.dt();
    let mut total = 0.0;
    for n in 1..time.levels() {
        let t = time.t(n);
        let nu = w.nu(t);
        for i in pb.op.active() {
            let e = w.log_exp_big_tilde(t, i);
            let yv = y.get(n, i);
            if yv != 0.0 {
                total += dt * pb.op.mass[i] * (2.0 * yv.abs().ln() - e).exp();
            }
            let v = u.get(n, i) * pb.mask[i];
            if v != 0.0 && nu.is_finite() {
                total += dt * pb.op.mass[i] * (2.0 * v.abs().ln() - 3.0 * (s * nu).ln() - e).exp();
            }
        }
    }
    total
}

impl ControlResult {
    /// Squared weighted norm `|e^{-s Phi~} y|^2` of the predicted state.
    pub fn weighted_state_norm_sq(&self, pb: &Problem) -> f64 {
        weighted_norm_sq_levels(pb, &self.weighted_state)
    }
}

/// Space-time norm over the levels `1..=m` of a flattened level field.
pub fn weighted_norm_sq_levels(pb: &Problem, values: &[f64]) -> f64 {
    let nn = pb.nodes();
    let dt = pb.time.dt();
    values
        .iter()
        .enumerate()
        .skip(nn)
        .map(|(idx, v)| {
            let i = idx % nn;
            if pb.op.is_active(i) {
                dt * pb.op.mass[i] * v * v
            } else {
                0.0
            }
        })
        .sum()
}
