use crate::error::{Error, Result};
use crate::model::{Coefficient, Form, SpatialGrid, TimeGrid};
use crate::weights::WeightSet;
use serde::Serialize;
use std::f64::consts::PI;

/// A smooth field given with the derivatives needed to manufacture its source.
pub struct Manufactured {
    pub value: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub dt: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub dxx: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl Manufactured {
    /// `sin(pi x) t^2 (T - t)^2`.
    pub fn standard(horizon: f64) -> Self {
        let tt = horizon;
        Self {
            value: Box::new(move |t, x| (PI * x).sin() * (t * (tt - t)).powi(2)),
            dt: Box::new(move |t, x| (PI * x).sin() * 2.0 * t * (tt - t) * (tt - 2.0 * t)),
            dxx: Box::new(move |t, x| -PI * PI * (PI * x).sin() * (t * (tt - t)).powi(2)),
        }
    }

    pub fn zero() -> Self {
        Self { value: Box::new(|_, _| 0.0), dt: Box::new(|_, _| 0.0), dxx: Box::new(|_, _| 0.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityLevel {
    pub nodes: usize,
    pub steps: usize,
    /// `|L+ w|^2 + |L- w|^2 + 2 <L+ w, L- w>`.
    pub value_left: f64,
    /// `|g e^{s phi}|^2`.
    pub value_right: f64,
    pub relative_residual: f64,
    /// `-s a(1) psi'(1) int theta w_x(t, 1)^2 dt`.
    pub boundary_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub levels: Vec<IdentityLevel>,
    /// Ratio of successive residuals under simultaneous refinement.
    pub reduction_factors: Vec<f64>,
    /// Empirical order `log2` of the reduction factors.
    pub slopes: Vec<f64>,
    pub s: f64,
}

impl IdentityReport {
    pub fn value_left(&self) -> f64 {
        self.levels.last().map_or(0.0, |l| l.value_left)
    }

    pub fn value_right(&self) -> f64 {
        self.levels.last().map_or(0.0, |l| l.value_right)
    }

    pub fn relative_residual(&self) -> f64 {
        self.levels.last().map_or(0.0, |l| l.relative_residual)
    }
}

/// Space part of the weight, `lambda (p - beta |p|)`, with its first two derivatives, from a
/// fine cumulative quadrature of `p' = x e^{x^2} / a`.
struct SpaceWeight {
    lambda: f64,
    shift: f64,
    coef: Coefficient,
}

impl SpaceWeight {
    fn p_prime(&self, x: f64) -> f64 {
        x * (x * x).exp() / self.coef.value(x)
    }

    fn p(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        // Gauss-Legendre on a graded mesh; the integrand behaves like x^{1 - alpha} at zero.
        let nodes = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
        let wts = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];
        let pieces = 40;
        let mut total = 0.0;
        for k in 0..pieces {
            let a = x * ((k as f64) / pieces as f64).powi(3);
            let b = x * (((k + 1) as f64) / pieces as f64).powi(3);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            for (z, w) in nodes.iter().zip(wts) {
                total += w * half * self.p_prime(mid + half * z);
            }
        }
        total
    }

    fn value(&self, x: f64) -> f64 {
        self.lambda * (self.p(x) - self.shift)
    }

    fn first(&self, x: f64) -> f64 {
        self.lambda * self.p_prime(x)
    }

    fn second(&self, x: f64) -> f64 {
        let a = self.coef.value(x);
        let e = (x * x).exp();
        self.lambda * ((1.0 + 2.0 * x * x) * e / a - x * e * self.coef.derivative(x) / (a * a))
    }
}

/// Evaluates the splitting of the conjugated operator `e^{s phi} L e^{-s phi}` into its formal
/// selfadjoint and skewadjoint parts on a sequence of uniform grids doubled in space and time.
///
/// The parts are built by finite differences from `w = e^{s phi} v`, the right side from the
/// exact source `g = v_t + a v_xx`, so the residual measures discretisation error only.
pub fn check_splitting_identity(
    field: &Manufactured,
    coef: &Coefficient,
    weights: &WeightSet,
    s: f64,
    nodes: usize,
    steps: usize,
    refinements: usize,
) -> Result<IdentityReport> {
    if coef.form != Form::NonDivergence {
        return Err(Error::Config("the splitting identity is checked for the non-divergence form".into()));
    }
    let space = SpaceWeight { lambda: weights.params.lambda, shift: weights.params.beta * weights.p_sup, coef: coef.clone() };
    let horizon = weights.params.horizon;
    let mut levels = Vec::new();
    for r in 0..=refinements {
        let grid = SpatialGrid::uniform(nodes << r)?;
        let time = TimeGrid::new(horizon, steps << r)?;
        levels.push(identity_on_grid(field, coef, &space, s, &grid, &time));
    }
    let reduction_factors: Vec<f64> =
        levels.windows(2).map(|w| w[0].relative_residual / w[1].relative_residual).collect();
    let slopes = reduction_factors.iter().map(|f| f.log2()).collect();
    Ok(IdentityReport { levels, reduction_factors, slopes, s })
}

fn identity_on_grid(
    field: &Manufactured,
    coef: &Coefficient,
    space: &SpaceWeight,
    s: f64,
    grid: &SpatialGrid,
    time: &TimeGrid,
) -> IdentityLevel {
    let x = grid.nodes();
    let nx = x.len();
    let h = x[1] - x[0];
    let m = time.steps();
    let dt = time.dt();
    let horizon = time.horizon();
    let psi: Vec<f64> = x.iter().map(|&xi| space.value(xi)).collect();
    let psi1: Vec<f64> = x.iter().map(|&xi| space.first(xi)).collect();
    let psi2: Vec<f64> = x.iter().map(|&xi| if xi > 0.0 { space.second(xi) } else { 0.0 }).collect();
    let a: Vec<f64> = coef.sample(x);
    let theta = |t: f64| crate::weights::theta(t, horizon);
    let theta_dot = |t: f64| {
        let q = t * (horizon - t);
        -2.0 * (horizon - 2.0 * t) / (q * q * q)
    };
    let w: Vec<Vec<f64>> = (0..=m)
        .map(|n| {
            let t = time.t(n);
            if n == 0 || n == m {
                return vec![0.0; nx];
            }
            let th = theta(t);
            x.iter().zip(&psi).map(|(&xi, p)| (s * th * p).exp() * (field.value)(t, xi)).collect()
        })
        .collect();

    let (mut left, mut right, mut boundary) = (0.0, 0.0, 0.0);
    for n in 1..m {
        let t = time.t(n);
        let (th, thd) = (theta(t), theta_dot(t));
        let wn = &w[n];
        let wx: Vec<f64> = (0..nx)
            .map(|i| {
                if i == 0 {
                    (-3.0 * wn[0] + 4.0 * wn[1] - wn[2]) / (2.0 * h)
                } else if i == nx - 1 {
                    (3.0 * wn[i] - 4.0 * wn[i - 1] + wn[i - 2]) / (2.0 * h)
                } else {
                    (wn[i + 1] - wn[i - 1]) / (2.0 * h)
                }
            })
            .collect();
        let wxx: Vec<f64> = (0..nx)
            .map(|i| {
                if i == 0 {
                    (2.0 * wn[0] - 5.0 * wn[1] + 4.0 * wn[2] - wn[3]) / (h * h)
                } else if i == nx - 1 {
                    (2.0 * wn[i] - 5.0 * wn[i - 1] + 4.0 * wn[i - 2] - wn[i - 3]) / (h * h)
                } else {
                    (wn[i + 1] - 2.0 * wn[i] + wn[i - 1]) / (h * h)
                }
            })
            .collect();
        let time_weight = dt;
        for i in 0..nx {
            if a[i] <= 0.0 {
                continue;
            }
            let wt = (w[n + 1][i] - w[n - 1][i]) / (2.0 * dt);
            let phi_t = thd * psi[i];
            let phi_x = th * psi1[i];
            let phi_xx = th * psi2[i];
            let plus = a[i] * wxx[i] - s * phi_t * wn[i] + s * s * a[i] * phi_x * phi_x * wn[i];
            let minus = wt - 2.0 * s * a[i] * phi_x * wx[i] - s * a[i] * phi_xx * wn[i];
            let xi = x[i];
            let g = (field.dt)(t, xi) + a[i] * (field.dxx)(t, xi);
            let gw = g * (s * th * psi[i]).exp();
            let q = time_weight * grid.weights()[i] / a[i];
            left += q * (plus * plus + minus * minus + 2.0 * plus * minus);
            right += q * gw * gw;
        }
        boundary += dt * th * wx[nx - 1] * wx[nx - 1];
    }
    let boundary_term = -s * a[nx - 1] * psi1[nx - 1] * boundary;
    let relative_residual = if right > 0.0 { (left - right).abs() / right } else { (left - right).abs() };
    IdentityLevel { nodes: nx - 1, steps: m, value_left: left, value_right: right, relative_residual, boundary_term }
}
