use crate::model::{Coefficient, Form, SpatialGrid};
use serde::Serialize;

/// Three-point discretisation of `a y_xx` or `(a y_x)_x` on the active nodes.
///
/// Rows of inactive (Dirichlet) nodes are zero. The operator is symmetric with respect to the
/// diagonal `mass` inner product, which is the natural space of the form.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteOperator {
    pub form: Form,
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub first: usize,
    pub last: usize,
    pub mass: Vec<f64>,
}

pub fn assemble_operator(coef: &Coefficient, grid: &SpatialGrid) -> DiscreteOperator {
    let form = coef.form;
    let x = grid.nodes();
    let n = x.len();
    let (mut lower, mut diag, mut upper) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let first = if form.free_left_end() { 0 } else { 1 };
    let last = n - 2;
    let q = grid.weights();
    let mut mass = vec![0.0; n];
    match form {
        Form::NonDivergence => {
            for i in first..=last {
                let (hl, hr) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                let ai = coef.value(x[i]);
                let s = 2.0 * ai / (hl + hr);
                lower[i] = s / hl;
                upper[i] = s / hr;
                diag[i] = -(lower[i] + upper[i]);
                mass[i] = q[i] / ai;
            }
        }
        Form::DivergenceWeak | Form::DivergenceStrong => {
            let flux: Vec<f64> = (0..n - 1)
                .map(|i| coef.value(0.5 * (x[i] + x[i + 1])) / (x[i + 1] - x[i]))
                .collect();
            for i in first..=last {
                let cell = q[i];
                let left = if i == 0 { 0.0 } else { flux[i - 1] };
                let right = flux[i];
                lower[i] = left / cell;
                upper[i] = right / cell;
                diag[i] = -(left + right) / cell;
                mass[i] = cell;
            }
        }
    }
    DiscreteOperator { form, lower, diag, upper, first, last, mass }
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn active(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }

    pub fn is_active(&self, i: usize) -> bool {
        i >= self.first && i <= self.last
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        for i in self.active() {
            let mut v = self.diag[i] * y[i] + self.upper[i] * y[i + 1];
            if i > 0 {
                v += self.lower[i] * y[i - 1];
            }
            out[i] = v;
        }
        out
    }

    /// Matrix transpose, restricted to active rows and columns.
    pub fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; r.len()];
        for i in self.active() {
            let mut v = self.diag[i] * r[i];
            if i > self.first {
                v += self.upper[i - 1] * r[i - 1];
            }
            if i < self.last {
                v += self.lower[i + 1] * r[i + 1];
            }
            out[i] = v;
        }
        out
    }

    /// Zeroes the inactive entries.
    pub fn restrict(&self, y: &mut [f64]) {
        for (i, v) in y.iter_mut().enumerate() {
            if !self.is_active(i) {
                *v = 0.0;
            }
        }
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.active().map(|i| self.mass[i] * u[i] * v[i]).sum()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }
}
