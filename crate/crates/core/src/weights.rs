//! Carleman weight functions and the parameter choices that make the estimates hold.

use crate::error::{Error, Result};
use crate::model::quad::cumulative_over_a;
use crate::model::{Coefficient, ControlRegion, Field, SpatialGrid, TimeGrid};
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

/// Floor applied to exponents before they are materialised.
pub const LOG_FLOOR: f64 = -700.0;

pub fn clamp_log(v: f64) -> f64 {
    if v.is_nan() {
        LOG_FLOOR
    } else {
        v.clamp(LOG_FLOOR, -LOG_FLOOR)
    }
}

/// `1 / (t (T - t))^2`, infinite at both ends.
pub fn theta(t: f64, horizon: f64) -> f64 {
    let q = t * (horizon - t);
    if q <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / (q * q)
    }
}

/// `theta` frozen at its minimum on the first half of the horizon.
pub fn nu(t: f64, horizon: f64) -> f64 {
    if t <= 0.5 * horizon {
        theta(0.5 * horizon, horizon)
    } else {
        theta(t, horizon)
    }
}

/// Upper end of the admissible window for the time shift `T* = (1 + eps) T / 2`.
pub fn epsilon_max() -> f64 {
    (1.0 - 2.0 * 2f64.sqrt() / 3.0).sqrt()
}

/// Smooth profile `sin(pi r(x))` peaking once, at the centre of the observation interval.
///
/// `r` is a C^2 piecewise cubic with `r(0) = 0`, `r(c) = 1/2`, `r(1) = 1`, `r''(c) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sigma {
    center: f64,
    slope: f64,
    left: f64,
    right: f64,
}

impl Sigma {
    pub fn new(center: f64) -> Result<Self> {
        if !(center > 0.0 && center < 1.0) {
            return Err(Error::InvalidRegion(format!("peak location {center} not in (0, 1)")));
        }
        let span = center.max(1.0 - center);
        let slope = 0.5 / span;
        let len_r = 1.0 - center;
        Ok(Self {
            center,
            slope,
            left: (slope * center - 0.5) / center.powi(3),
            right: (0.5 - slope * len_r) / len_r.powi(3),
        })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    fn reparam(&self, x: f64) -> (f64, f64, f64) {
        if x <= self.center {
            let u = self.center - x;
            (0.5 - self.slope * u + self.left * u.powi(3), self.slope - 3.0 * self.left * u * u, 6.0 * self.left * u)
        } else {
            let u = x - self.center;
            (0.5 + self.slope * u + self.right * u.powi(3), self.slope + 3.0 * self.right * u * u, 6.0 * self.right * u)
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        (PI * self.reparam(x).0).sin()
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (r, r1, _) = self.reparam(x);
        PI * (PI * r).cos() * r1
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let (r, r1, r2) = self.reparam(x);
        -PI * PI * (PI * r).sin() * r1 * r1 + PI * (PI * r).cos() * r2
    }

    /// Reparametrisation derivative `r'`, positive everywhere.
    pub fn reparam_slope(&self, x: f64) -> f64 {
        self.reparam(x).1
    }
}

pub fn build_sigma(region: &ControlRegion, grid: &SpatialGrid) -> Result<(Sigma, Vec<f64>)> {
    let sigma = Sigma::new(region.inner_center())?;
    let values = grid.sample(|x| sigma.value(x));
    Ok((sigma, values))
}

/// `p(x) = int_0^x y e^{y^2} / a(y) dy` on the grid.
pub fn compute_p(coef: &Coefficient, grid: &SpatialGrid) -> Result<Vec<f64>> {
    let g = grid.sample(|y| y * (y * y).exp());
    let p = cumulative_over_a(&g, coef, grid);
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCoefficient("y/a(y) is not integrable at the origin".into()));
    }
    Ok(p)
}

/// `int_0^x y / a(y) dy` on the grid.
pub fn compute_q(coef: &Coefficient, grid: &SpatialGrid) -> Result<Vec<f64>> {
    let g = grid.nodes().to_vec();
    let q = cumulative_over_a(&g, coef, grid);
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCoefficient("y/a(y) is not integrable at the origin".into()));
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub horizon: f64,
    pub s: f64,
    pub lambda: f64,
    pub beta: f64,
    pub rho: f64,
    pub epsilon: f64,
    /// Divergence-branch slope and shift.
    pub c: f64,
    pub d: f64,
}

impl WeightParams {
    pub fn t_star(&self) -> f64 {
        0.5 * (1.0 + self.epsilon) * self.horizon
    }
}

/// Optional user overrides for [`choose_parameters`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamOverrides {
    pub s: Option<f64>,
    pub lambda: Option<f64>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub epsilon: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
}

/// Spatial tables and parameters from which every weight is evaluated.
#[derive(Debug, Clone, Serialize)]
pub struct WeightSet {
    pub params: WeightParams,
    pub divergence: bool,
    pub sigma: Vec<f64>,
    pub sigma_sup: f64,
    pub p: Vec<f64>,
    pub p_sup: f64,
    /// `lambda (p - beta |p|)`.
    pub psi: Vec<f64>,
    /// `e^{rho sigma} - e^{2 rho |sigma|}`.
    pub big_psi: Vec<f64>,
    /// `c (q - d)` with `q(x) = int_0^x y/a`; empty outside the divergence branch.
    pub upsilon: Vec<f64>,
    pub q_sup: f64,
    /// `2 s nu(t) Psi(x)` at the time levels, clamped at [`LOG_FLOOR`].
    pub log_weight: Field,
}

impl WeightSet {
    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    pub fn theta(&self, t: f64) -> f64 {
        theta(t, self.params.horizon)
    }

    pub fn nu(&self, t: f64) -> f64 {
        nu(t, self.params.horizon)
    }

    /// Space part of the main weight: `psi` in the non-divergence branch, `Upsilon` otherwise.
    pub fn main_space(&self) -> &[f64] {
        if self.divergence {
            &self.upsilon
        } else {
            &self.psi
        }
    }

    /// Log of `exp(2 s nu(t) Psi(x_i))` with the floor applied.
    pub fn log_exp_big_tilde(&self, t: f64, i: usize) -> f64 {
        let v = self.nu(t);
        if !v.is_finite() {
            return LOG_FLOOR;
        }
        clamp_log(2.0 * self.params.s * v * self.big_psi[i])
    }

    pub fn main_hat(&self, t_fn: f64) -> f64 {
        t_fn * self.main_space().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn main_check(&self, t_fn: f64) -> f64 {
        t_fn * self.main_space().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn big_hat(&self, t_fn: f64) -> f64 {
        t_fn * self.big_psi.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn big_check(&self, t_fn: f64) -> f64 {
        t_fn * self.big_psi.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Exponent `2 s [hat(0) - check(T*)]` of the constant in the modified estimate.
    pub fn estimate_exponent(&self) -> f64 {
        let t_shift = if self.divergence { 0.625 * self.params.horizon } else { self.params.t_star() };
        2.0 * self.params.s * (self.main_hat(self.nu(0.0)) - self.main_check(self.nu(t_shift)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParameterReport {
    pub lambda_interval: Option<(f64, f64)>,
    pub c_interval: Option<(f64, f64)>,
    pub rho_bound: f64,
    pub epsilon_max: f64,
    pub d_star: f64,
    pub p_sup: f64,
    pub sigma_sup: f64,
    pub kernel_rate: f64,
}

fn lambda_interval(rho: f64, sigma_sup: f64, beta: f64, p_sup: f64) -> (f64, f64) {
    let e1 = (rho * sigma_sup).exp();
    let e2 = (2.0 * rho * sigma_sup).exp();
    ((e2 - 1.0) / ((beta - 1.0) * p_sup), 2.0 * (e2 - e1) / ((beta - 1.0) * p_sup))
}

fn c_interval(rho: f64, sigma_sup: f64, d: f64, d_star: f64) -> (f64, f64) {
    let e1 = (rho * sigma_sup).exp();
    let e2 = (2.0 * rho * sigma_sup).exp();
    ((e2 - 1.0) / (d - d_star), 16.0 / 15.0 * (e2 - e1) / (d - d_star))
}

/// Exponential rate of the kernel hypothesis: `8 lambda |p| (4/T)^2` or `c d (4/T)^2`.
pub fn kernel_rate(w: &WeightSet) -> f64 {
    let k = (4.0 / w.params.horizon).powi(2);
    if w.divergence {
        w.params.c * w.params.d * k
    } else {
        8.0 * w.params.lambda * w.p_sup * k
    }
}

pub fn choose_parameters(
    coef: &Coefficient,
    region: &ControlRegion,
    grid: &SpatialGrid,
    time: &TimeGrid,
    overrides: &ParamOverrides,
) -> Result<(WeightSet, ParameterReport)> {
    let horizon = time.horizon();
    let divergence = coef.form.is_divergence();
    let (_, sigma) = build_sigma(region, grid)?;
    let sigma_sup = sigma.iter().cloned().fold(0.0, f64::max);
    let beta = overrides.beta.unwrap_or(4.0);
    let rho_bound = if divergence { 15f64.ln() / sigma_sup } else { LN_2 / sigma_sup };
    let rho = overrides.rho.unwrap_or_else(|| (1.05 * rho_bound).max(1.0));
    let epsilon = overrides.epsilon.unwrap_or(0.2);

    let (lambda, lam_iv, p_sup) = if divergence {
        (overrides.lambda.unwrap_or(1.0), None, 0.0)
    } else {
        let p = compute_p(coef, grid)?;
        let p_sup = p.iter().cloned().fold(0.0, f64::max);
        let iv = lambda_interval(rho, sigma_sup, beta, p_sup);
        (overrides.lambda.unwrap_or(0.5 * (iv.0 + iv.1)), Some(iv), p_sup)
    };

    let (c, d, c_iv, d_star) = if divergence {
        let q = compute_q(coef, grid)?;
        let d_star = q.iter().cloned().fold(0.0, f64::max);
        let d = overrides.d.unwrap_or(4.5 * d_star);
        let iv = c_interval(rho, sigma_sup, d, d_star);
        if !(iv.1 > iv.0) {
            return Err(Error::Parameter(format!(
                "empty interval for c: ({:.6e}, {:.6e}) with rho = {rho}, d = {d}, d* = {d_star}",
                iv.0, iv.1
            )));
        }
        (overrides.c.unwrap_or(0.5 * (iv.0 + iv.1)), d, Some(iv), d_star)
    } else {
        (overrides.c.unwrap_or(0.0), overrides.d.unwrap_or(0.0), None, 0.0)
    };

    let psi_range = (2.0 * rho * sigma_sup).exp() - 1.0;
    let s = overrides.s.unwrap_or_else(|| 20.0 / (nu(0.75 * horizon, horizon) * psi_range));
    let params = WeightParams { horizon, s, lambda, beta, rho, epsilon, c, d };
    let weights = assemble_weights(coef, region, grid, time, params)?;
    let report = ParameterReport {
        lambda_interval: lam_iv,
        c_interval: c_iv,
        rho_bound,
        epsilon_max: epsilon_max(),
        d_star,
        p_sup,
        sigma_sup,
        kernel_rate: kernel_rate(&weights),
    };
    Ok((weights, report))
}

pub fn assemble_weights(
    coef: &Coefficient,
    region: &ControlRegion,
    grid: &SpatialGrid,
    time: &TimeGrid,
    params: WeightParams,
) -> Result<WeightSet> {
    let divergence = coef.form.is_divergence();
    if (params.horizon - time.horizon()).abs() > 1e-12 * time.horizon() {
        return Err(Error::Parameter("weight horizon differs from the time grid".into()));
    }
    if !(params.s > 0.0) {
        return Err(Error::Parameter(format!("s = {} must be positive", params.s)));
    }
    if !(params.beta > 1.0) {
        return Err(Error::Parameter(format!("beta = {} must exceed 1", params.beta)));
    }
    if !(params.epsilon > 0.0 && params.epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon = {} must lie in (0, 1)", params.epsilon)));
    }
    let (_, sigma) = build_sigma(region, grid)?;
    let sigma_sup = sigma.iter().cloned().fold(0.0, f64::max);
    if !(params.rho * sigma_sup > LN_2) {
        return Err(Error::Parameter(format!("rho = {} below ln 2 / |sigma|", params.rho)));
    }
    let e2 = (2.0 * params.rho * sigma_sup).exp();
    let big_psi: Vec<f64> = sigma.iter().map(|&sg| (params.rho * sg).exp() - e2).collect();

    let (p, p_sup, psi) = if divergence {
        (Vec::new(), 0.0, Vec::new())
    } else {
        let p = compute_p(coef, grid)?;
        let p_sup = p.iter().cloned().fold(0.0, f64::max);
        let lower = (e2 - 1.0) / ((params.beta - 1.0) * p_sup);
        if params.lambda < lower * (1.0 - 1e-12) {
            return Err(Error::Parameter(format!(
                "lambda = {} below the admissible lower bound {lower:.6e}",
                params.lambda
            )));
        }
        let psi = p.iter().map(|&pv| params.lambda * (pv - params.beta * p_sup)).collect();
        (p, p_sup, psi)
    };

    let (upsilon, q_sup) = if divergence {
        let q = compute_q(coef, grid)?;
        let q_sup = q.iter().cloned().fold(0.0, f64::max);
        if !(params.d > q_sup) {
            return Err(Error::Parameter(format!("d = {} must exceed sup q = {q_sup}", params.d)));
        }
        let lower = (e2 - 1.0) / (params.d - q_sup);
        if params.c < lower * (1.0 - 1e-12) {
            return Err(Error::Parameter(format!("c = {} below the admissible lower bound {lower:.6e}", params.c)));
        }
        (q.iter().map(|&qv| params.c * (qv - params.d)).collect(), q_sup)
    } else {
        (Vec::new(), 0.0)
    };

    let mut log_weight = Field::zeros(time.levels(), grid.len());
    for n in 0..time.levels() {
        let v = nu(time.t(n), params.horizon);
        for (i, bp) in big_psi.iter().enumerate() {
            let e = if v.is_finite() { clamp_log(2.0 * params.s * v * bp) } else { LOG_FLOOR };
            log_weight.set(n, i, e);
        }
    }

    Ok(WeightSet { params, divergence, sigma, sigma_sup, p, p_sup, psi, big_psi, upsilon, q_sup, log_weight })
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub epsilon: f64,
    pub epsilon_max: f64,
    pub epsilon_ok: bool,
    /// `8 nu(T*) - 9 nu(0)`.
    pub nu_combination: f64,
    /// `2 (hat phi(0) - check phi(T*) + hat Phi(0))`, non-divergence branch.
    pub shift_value: Option<f64>,
    /// `2 hat Phi(t) <= hat phi(t)` at every finite time level.
    pub hat_bound_ok: Option<bool>,
    /// `2 hat Phi(0) - check phi(5T/8)`, divergence branch.
    pub divergence_value: Option<f64>,
    pub passed: bool,
}

pub fn verify_parameter_inequalities(w: &WeightSet, time: &TimeGrid) -> InequalityReport {
    let p = &w.params;
    let t_star = p.t_star();
    let nu0 = w.nu(0.0);
    let nu_combination = 8.0 * w.nu(t_star) - 9.0 * nu0;
    let eps_max = epsilon_max();
    let epsilon_ok = p.epsilon > 0.0 && p.epsilon < eps_max;
    let mut passed = epsilon_ok && nu_combination < 0.0;
    let (shift_value, hat_bound_ok, divergence_value) = if w.divergence {
        let v = 2.0 * w.big_hat(nu0) - w.main_check(w.nu(0.625 * p.horizon));
        passed &= v < 0.0;
        (None, None, Some(v))
    } else {
        let v = 2.0 * (w.main_hat(nu0) - w.main_check(w.nu(t_star)) + w.big_hat(nu0));
        let hb = (0..time.levels())
            .map(|n| w.nu(time.t(n)))
            .filter(|v| v.is_finite())
            .all(|v| 2.0 * w.big_hat(v) <= w.main_hat(v));
        passed &= v < 0.0 && hb;
        (Some(v), Some(hb), None)
    };
    InequalityReport {
        epsilon: p.epsilon,
        epsilon_max: eps_max,
        epsilon_ok,
        nu_combination,
        shift_value,
        hat_bound_ok,
        divergence_value,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_window_closes_the_budget() {
        let e = epsilon_max();
        let t_star = 0.5 * (1.0 + e);
        assert!((8.0 * nu(t_star, 1.0) - 9.0 * nu(0.0, 1.0)).abs() < 1e-9);
    }

    #[test]
    fn clamp_handles_nan_and_extremes() {
        assert_eq!(clamp_log(f64::NAN), LOG_FLOOR);
        assert_eq!(clamp_log(-1e9), LOG_FLOOR);
        assert_eq!(clamp_log(3.0), 3.0);
    }
}
