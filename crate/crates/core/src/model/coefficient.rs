use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// `y_t - a y_xx`, Dirichlet at both ends.
    NonDivergence,
    /// `y_t - (a y_x)_x` with `alpha < 1`, Dirichlet at both ends.
    DivergenceWeak,
    /// `y_t - (a y_x)_x` with `1 <= alpha < 2`, zero flux at 0 and Dirichlet at 1.
    DivergenceStrong,
}

impl Form {
    pub fn is_divergence(self) -> bool {
        !matches!(self, Form::NonDivergence)
    }

    /// Whether the node at `x = 0` is an unknown.
    pub fn free_left_end(self) -> bool {
        matches!(self, Form::DivergenceStrong)
    }

    pub fn admits(self, alpha: f64) -> bool {
        match self {
            Form::NonDivergence => alpha > 0.0 && alpha < 2.0,
            Form::DivergenceWeak => (0.0..1.0).contains(&alpha),
            Form::DivergenceStrong => (1.0..2.0).contains(&alpha),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Form::NonDivergence => "nondiv",
            Form::DivergenceWeak => "div_weak",
            Form::DivergenceStrong => "div_strong",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Power { alpha: f64, scale: f64 },
    /// Non-degenerate reference coefficient, useful for comparisons with the classical heat equation.
    Constant { value: f64 },
    /// Piecewise-linear table with a declared degeneracy exponent.
    Tabulated { x: Vec<f64>, a: Vec<f64>, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub form: Form,
    pub shape: Shape,
    /// Exponent used in the near-zero monotonicity hypothesis of the strongly degenerate case.
    pub monotonicity_exponent: Option<f64>,
}

impl Coefficient {
    pub fn power(form: Form, alpha: f64) -> Self {
        Self { form, shape: Shape::Power { alpha, scale: 1.0 }, monotonicity_exponent: None }
    }

    pub fn constant(form: Form, value: f64) -> Self {
        Self { form, shape: Shape::Constant { value }, monotonicity_exponent: None }
    }

    pub fn tabulated(form: Form, x: Vec<f64>, a: Vec<f64>, alpha: f64) -> Result<Self> {
        if x.len() != a.len() || x.len() < 2 {
            return Err(Error::InvalidCoefficient("table needs matching columns of length >= 2".into()));
        }
        if x[0] != 0.0 || *x.last().unwrap() != 1.0 || x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCoefficient("table abscissae must increase from 0 to 1".into()));
        }
        Ok(Self { form, shape: Shape::Tabulated { x, a, alpha }, monotonicity_exponent: None })
    }

    /// Degeneracy exponent; zero for the constant reference.
    pub fn alpha(&self) -> f64 {
        match &self.shape {
            Shape::Power { alpha, .. } | Shape::Tabulated { alpha, .. } => *alpha,
            Shape::Constant { .. } => 0.0,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Power { alpha, scale } => {
                if x == 0.0 {
                    if *alpha == 0.0 {
                        *scale
                    } else {
                        0.0
                    }
                } else {
                    scale * x.powf(*alpha)
                }
            }
            Shape::Constant { value } => *value,
            Shape::Tabulated { x: xs, a, .. } => {
                let k = locate(xs, x);
                let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
                a[k] * (1.0 - w) + a[k + 1] * w
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Power { alpha, scale } => {
                if *alpha == 0.0 {
                    0.0
                } else if x == 0.0 {
                    if *alpha < 1.0 {
                        f64::INFINITY
                    } else if *alpha == 1.0 {
                        *scale
                    } else {
                        0.0
                    }
                } else {
                    scale * alpha * x.powf(alpha - 1.0)
                }
            }
            Shape::Constant { .. } => 0.0,
            Shape::Tabulated { x: xs, a, .. } => {
                let k = locate(xs, x);
                let slope = |j: usize| (a[j + 1] - a[j]) / (xs[j + 1] - xs[j]);
                let on_node = (x - xs[k]).abs() < 1e-14 * (1.0 + x.abs());
                if on_node && k > 0 {
                    0.5 * (slope(k - 1) + slope(k))
                } else {
                    slope(k)
                }
            }
        }
    }

    /// `x a'(x) / a(x)`, with the power-law limit at `x = 0`.
    pub fn log_slope(&self, x: f64) -> f64 {
        if x == 0.0 {
            return self.alpha();
        }
        x * self.derivative(x) / self.value(x)
    }

    pub fn sample(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&x| self.value(x)).collect()
    }
}

fn locate(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    match xs.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
        Ok(k) => k.min(n - 2),
        Err(0) => 0,
        Err(k) => (k - 1).min(n - 2),
    }
}
