//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the library's solvers: the finite-difference stepping, the tridiagonal solve
//! and the norms are written out directly from the model equations.
#![allow(dead_code)]

use degenctl::model::{Field, Form};

pub const PI: f64 = std::f64::consts::PI;

/// Uniform-grid model of `y_t - A y + k(t) int y = 1_omega u` with `a = x^alpha`.
#[derive(Debug, Clone, Copy)]
pub struct Reference {
    pub form: Form,
    pub alpha: f64,
    pub cells: usize,
    pub steps: usize,
    pub horizon: f64,
    pub omega: (f64, f64),
}

impl Reference {
    pub fn new(form: Form, alpha: f64, cells: usize, steps: usize) -> Self {
        Self { form, alpha, cells, steps, horizon: 1.0, omega: (0.3, 0.8) }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.cells as f64
    }

    fn a(&self, x: f64) -> f64 {
        x.powf(self.alpha)
    }

    /// Index range of the unknowns: the degenerate end is free only in the strongly degenerate case.
    fn unknowns(&self) -> (usize, usize) {
        let first = if self.form == Form::DivergenceStrong { 0 } else { 1 };
        (first, self.cells - 1)
    }

    /// Trapezoid weight of node `i`.
    fn q(&self, i: usize) -> f64 {
        if i == 0 || i == self.cells {
            0.5 * self.h()
        } else {
            self.h()
        }
    }

    /// Squared norm in the natural space: `L^2_{1/a}` for the non-divergence form, `L^2` otherwise.
    pub fn norm_sq(&self, y: &[f64]) -> f64 {
        let (first, last) = self.unknowns();
        (first..=last)
            .map(|i| {
                let w = if self.form == Form::NonDivergence { self.q(i) / self.a(self.x(i)) } else { self.q(i) };
                w * y[i] * y[i]
            })
            .sum()
    }

    pub fn norm(&self, y: &[f64]) -> f64 {
        self.norm_sq(y).sqrt()
    }

    /// Row `i` of the spatial operator as `(left, centre, right)`.
    fn stencil(&self, i: usize) -> (f64, f64, f64) {
        let h = self.h();
        match self.form {
            Form::NonDivergence => {
                let a = self.a(self.x(i));
                (a / (h * h), -2.0 * a / (h * h), a / (h * h))
            }
            _ => {
                let right = self.a(self.x(i) + 0.5 * h) / h;
                let left = if i == 0 { 0.0 } else { self.a(self.x(i) - 0.5 * h) / h };
                let cell = self.q(i);
                (left / cell, -(left + right) / cell, right / cell)
            }
        }
    }

    /// Implicit Euler with the nonlocal term `k(t_n) sum_j q_j y_j^n` lagged by one step and the
    /// forcing taken at the new level.
    pub fn forward(&self, y0: &[f64], u: Option<&Field>, k: &dyn Fn(f64) -> f64) -> Vec<Vec<f64>> {
        let (first, last) = self.unknowns();
        let dim = last - first + 1;
        let dt = self.horizon / self.steps as f64;
        let n = self.cells + 1;
        let mut lower = vec![0.0; dim];
        let mut diag = vec![0.0; dim];
        let mut upper = vec![0.0; dim];
        for (r, i) in (first..=last).enumerate() {
            let (l, c, rr) = self.stencil(i);
            lower[r] = -dt * l;
            diag[r] = 1.0 - dt * c;
            upper[r] = -dt * rr;
        }
        let mut y = y0.to_vec();
        for (i, v) in y.iter_mut().enumerate() {
            if i < first || i > last {
                *v = 0.0;
            }
        }
        let mut out = vec![y.clone()];
        for step in 0..self.steps {
            let t = step as f64 * dt;
            let integral: f64 = (0..n).map(|j| self.q(j) * y[j]).sum();
            let kn = k(t);
            let rhs: Vec<f64> = (first..=last)
                .map(|i| {
                    let xi = self.x(i);
                    let inside = self.omega.0 < xi && xi < self.omega.1;
                    let ui = match u {
                        Some(u) if inside => u.get(step + 1, i),
                        _ => 0.0,
                    };
                    y[i] + dt * (ui - kn * integral)
                })
                .collect();
            let sol = thomas(&lower, &diag, &upper, &rhs);
            let mut next = vec![0.0; n];
            for (r, i) in (first..=last).enumerate() {
                next[i] = sol[r];
            }
            out.push(next.clone());
            y = next;
        }
        out
    }
}

/// Thomas algorithm for a diagonally dominant tridiagonal system.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Relative change `|a - b| / max(|a|, |b|)`.
pub fn rel_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
