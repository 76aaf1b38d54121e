use super::quad::integral_over_a;
use super::{Coefficient, Form, Shape, SpatialGrid};
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientReport {
    pub form: Form,
    pub alpha: f64,
    /// `max (x a' - alpha a) / a` over interior nodes; nonpositive when the growth bound holds.
    pub growth_excess: f64,
    pub growth_ok: bool,
    pub ratio_monotone: bool,
    pub int_inv_a: f64,
    pub inv_a_integrable: bool,
    pub int_inv_sqrt_a: f64,
    pub inv_sqrt_a_integrable: bool,
    /// Smallest `c >= 0` with `(x a'/a)'' <= c / a` on the grid.
    pub curvature_constant: f64,
    /// Near-zero monotonicity of `a / x^beta` (strongly degenerate case only).
    pub near_zero_monotone: Option<bool>,
    pub near_zero_exponent: Option<f64>,
    pub passed: bool,
    pub violations: Vec<String>,
}

const REL_TOL: f64 = 1e-10;

pub fn validate_coefficient(coef: &Coefficient, grid: &SpatialGrid) -> Result<CoefficientReport> {
    let alpha = coef.alpha();
    let form = coef.form;
    let x = grid.nodes();
    let n = x.len();
    let a0 = coef.value(0.0);
    if a0 != 0.0 {
        return Err(Error::InvalidCoefficient(format!("a(0) = {a0}, the coefficient must vanish at 0")));
    }
    if let Some(i) = (1..n).find(|&i| !(coef.value(x[i]) > 0.0)) {
        return Err(Error::InvalidCoefficient(format!("a(x) <= 0 at x = {}", x[i])));
    }
    if !form.admits(alpha) {
        return Err(Error::InvalidCoefficient(format!(
            "exponent {alpha} not admissible for form {}",
            form.name()
        )));
    }

    let mut violations = Vec::new();
    let a: Vec<f64> = x.iter().map(|&xi| coef.value(xi)).collect();

    // A table has no derivative at its nodes, so its growth is judged by log-log secants.
    let growth_excess = if matches!(coef.shape, Shape::Tabulated { .. }) {
        (1..n - 1)
            .map(|i| (a[i + 1] / a[i]).ln() / (x[i + 1] / x[i]).ln() - alpha)
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        (1..n)
            .map(|i| (x[i] * coef.derivative(x[i]) - alpha * a[i]) / a[i])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let growth_ok = growth_excess <= REL_TOL;
    if !growth_ok {
        violations.push(format!("x a'(x) exceeds alpha a(x) by a relative {growth_excess:.3e}"));
    }

    let ratio: Vec<f64> = (1..n).map(|i| x[i].powf(alpha) / a[i]).collect();
    let ratio_monotone = ratio.windows(2).all(|w| w[1] >= w[0] * (1.0 - REL_TOL));
    if !ratio_monotone {
        violations.push("x^alpha / a(x) is not nondecreasing".into());
    }

    let ones = vec![1.0; n];
    let int_inv_a = integral_over_a(&ones, coef, grid, 1.0);
    let int_inv_sqrt_a = integral_over_a(&ones, coef, grid, 0.5);

    let rho: Vec<f64> = x.iter().map(|&xi| coef.log_slope(xi)).collect();
    let mut curvature_constant: f64 = 0.0;
    for i in 1..n - 1 {
        let (hl, hr) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        let d2 = 2.0 * (hl * rho[i + 1] - (hl + hr) * rho[i] + hr * rho[i - 1]) / (hl * hr * (hl + hr));
        curvature_constant = curvature_constant.max(a[i] * d2);
    }

    let (near_zero_monotone, near_zero_exponent) = if form == Form::DivergenceStrong {
        let beta = coef
            .monotonicity_exponent
            .unwrap_or(if alpha > 1.0 { alpha } else { 0.5 });
        let beta_ok = if alpha > 1.0 { beta > 1.0 && beta <= alpha } else { beta > 0.0 && beta < 1.0 };
        if !beta_ok {
            violations.push(format!("monotonicity exponent {beta} not admissible for alpha {alpha}"));
        }
        let upto = (n / 4).max(3);
        let r: Vec<f64> = (1..upto).map(|i| a[i] / x[i].powf(beta)).collect();
        let mono = beta_ok && r.windows(2).all(|w| w[1] >= w[0] * (1.0 - REL_TOL));
        if !mono {
            violations.push(format!("a(x)/x^{beta} is not nondecreasing near 0"));
        }
        (Some(mono), Some(beta))
    } else {
        (None, None)
    };

    let passed = violations.is_empty();
    Ok(CoefficientReport {
        form,
        alpha,
        growth_excess,
        growth_ok,
        ratio_monotone,
        int_inv_a,
        inv_a_integrable: int_inv_a.is_finite(),
        int_inv_sqrt_a,
        inv_sqrt_a_integrable: int_inv_sqrt_a.is_finite(),
        curvature_constant,
        near_zero_monotone,
        near_zero_exponent,
        passed,
        violations,
    })
}
