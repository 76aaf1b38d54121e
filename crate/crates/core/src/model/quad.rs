use super::{Coefficient, SpatialGrid};

/// Inner product in `L^2_{1/a}(0,1)` by the trapezoid rule.
///
/// The integrand at `x = 0` is taken as zero when both profiles vanish there; otherwise the first
/// cell is integrated with the power-law behaviour of `a` near the origin, which may be infinite.
pub fn weighted_inner(u: &[f64], v: &[f64], coef: &Coefficient, grid: &SpatialGrid) -> f64 {
    let g: Vec<f64> = u.iter().zip(v).map(|(a, b)| a * b).collect();
    integral_over_a(&g, coef, grid, 1.0)
}

pub fn weighted_norm_sq(u: &[f64], coef: &Coefficient, grid: &SpatialGrid) -> f64 {
    weighted_inner(u, u, coef, grid)
}

pub fn plain_inner(u: &[f64], v: &[f64], grid: &SpatialGrid) -> f64 {
    grid.weights().iter().zip(u.iter().zip(v)).map(|(w, (a, b))| w * a * b).sum()
}

pub fn plain_norm_sq(u: &[f64], grid: &SpatialGrid) -> f64 {
    plain_inner(u, u, grid)
}

/// `int_0^1 g / a^p dx`.
pub fn integral_over_a(g: &[f64], coef: &Coefficient, grid: &SpatialGrid, p: f64) -> f64 {
    let x = grid.nodes();
    let a0 = coef.value(0.0);
    let w = grid.weights();
    let body: f64 = (1..x.len()).map(|i| w[i] * g[i] / coef.value(x[i]).powf(p)).sum();
    if a0 > 0.0 {
        return body + w[0] * g[0] / a0.powf(p);
    }
    if g[0] == 0.0 {
        return body;
    }
    // g does not vanish at the origin: replace the first half-cell by a power-law tail.
    let x1 = x[1];
    let f1 = g[1] / coef.value(x1).powf(p);
    let gamma = -p * coef.alpha();
    let first_half = w[1].min(0.5 * x1);
    let without_first = body - first_half * f1;
    if gamma <= -1.0 {
        return if f1 == 0.0 { without_first } else { f64::INFINITY.copysign(f1) };
    }
    without_first + f1 * x1 / (gamma + 1.0)
}

/// Running integral `x -> int_0^x g / a dy` at every node, for `g` vanishing linearly at zero.
///
/// The first cell uses the exact integral of the power-law model `g/a ~ c y^{1 - alpha}`.
pub fn cumulative_over_a(g: &[f64], coef: &Coefficient, grid: &SpatialGrid) -> Vec<f64> {
    let x = grid.nodes();
    let mut out = vec![0.0; x.len()];
    let f: Vec<f64> = x.iter().zip(g).map(|(&xi, gi)| if xi == 0.0 { 0.0 } else { gi / coef.value(xi) }).collect();
    if coef.value(0.0) > 0.0 {
        let f0 = g[0] / coef.value(0.0);
        out[1] = 0.5 * x[1] * (f0 + f[1]);
    } else {
        let gamma = 1.0 - coef.alpha();
        out[1] = f[1] * x[1] / (gamma + 1.0);
    }
    for i in 2..x.len() {
        out[i] = out[i - 1] + 0.5 * (x[i] - x[i - 1]) * (f[i - 1] + f[i]);
    }
    out
}

/// Trapezoid integral of a nodal profile.
pub fn integrate(g: &[f64], grid: &SpatialGrid) -> f64 {
    grid.weights().iter().zip(g).map(|(w, v)| w * v).sum()
}
