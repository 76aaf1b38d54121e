use super::common::{random_coefficients, sine_series, DEFAULT_SEED};
use crate::error::Result;
use crate::model::Field;
use crate::pde::{solve_forward, Problem, Stepper};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipativityReport {
    pub norms: Vec<f64>,
    /// Every step strictly lowers the norm.
    pub strictly_decreasing: bool,
    /// Every step satisfies `|y^{n+1}| <= |y^n| (1 + tol)`.
    pub nonincreasing: bool,
    pub tolerance: f64,
}

/// Norm history of the free evolution of `y0` in the natural space.
pub fn check_dissipativity(pb: &Problem, y0: &[f64], stepper: Stepper, tolerance: f64) -> Result<DissipativityReport> {
    let y = solve_forward(pb, y0, None, None, stepper)?;
    let norms: Vec<f64> = y.rows().map(|r| pb.norm(r)).collect();
    let strictly_decreasing = norms.windows(2).all(|w| w[1] < w[0]);
    let nonincreasing = norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + tolerance));
    Ok(DissipativityReport { norms, strictly_decreasing, nonincreasing, tolerance })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    /// `(sup_t |y|^2 + int |y|_{H^1}^2) / (|y0|^2 + |f|^2 + |u|^2)` per member.
    pub constants: Vec<f64>,
    pub max_constant: f64,
    pub dissipativity: DissipativityReport,
}

/// Squared first-order norm in the energy space of the form.
fn h1_sq(pb: &Problem, y: &[f64]) -> f64 {
    let x = pb.grid.nodes();
    let grad: f64 = (0..x.len() - 1)
        .map(|i| {
            let h = x[i + 1] - x[i];
            let d = (y[i + 1] - y[i]).powi(2) / h;
            if pb.coef.form.is_divergence() {
                d * pb.coef.value(0.5 * (x[i] + x[i + 1]))
            } else {
                d
            }
        })
        .sum();
    pb.op.inner(y, y) + grad
}

fn field_sq(pb: &Problem, f: &Field, masked: bool) -> f64 {
    (0..f.levels())
        .map(|n| {
            let mut row = f.level(n).to_vec();
            if masked {
                row.iter_mut().zip(&pb.mask).for_each(|(v, m)| *v *= m);
            }
            pb.time.weight(n) * pb.op.inner(&row, &row)
        })
        .sum()
}

/// Empirical constants of the energy estimate for random data, plus the dissipativity of the free
/// evolution of `sin(pi x)`.
pub fn check_energy_estimates(pb: &Problem, members: usize, seed: Option<u64>, stepper: Stepper) -> Result<EnergyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(DEFAULT_SEED));
    let data: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..members)
        .map(|_| {
            (
                random_coefficients(&mut rng, 6, 1.5),
                random_coefficients(&mut rng, 4, 1.5),
                random_coefficients(&mut rng, 4, 1.5),
            )
        })
        .collect();
    let horizon = pb.time.horizon();
    let constants = data
        .par_iter()
        .map(|(c0, cf, cu)| {
            let y0 = pb.grid.sample(|x| sine_series(c0, x));
            let f = Field::from_fn(&pb.time, &pb.grid, |t, x| sine_series(cf, x) * (PI * t / horizon).cos());
            let u = Field::from_fn(&pb.time, &pb.grid, |t, x| sine_series(cu, x) * (PI * t / horizon).sin());
            let y = solve_forward(pb, &y0, Some(&f), Some(&u), stepper)?;
            let sup = y.rows().map(|r| pb.op.inner(r, r)).fold(0.0, f64::max);
            let integral: f64 = (0..y.levels()).map(|n| pb.time.weight(n) * h1_sq(pb, y.level(n))).sum();
            let data_norm = pb.op.inner(&y0, &y0) + field_sq(pb, &f, false) + field_sq(pb, &u, true);
            Ok((sup + integral) / data_norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_constant = constants.iter().cloned().fold(0.0, f64::max);
    let y0 = pb.grid.sample(|x| (PI * x).sin());
    let local = pb.with_kernel(crate::model::Kernel::zero())?;
    let dissipativity = check_dissipativity(&local, &y0, stepper, 1e-12)?;
    Ok(EnergyReport { constants, max_constant, dissipativity })
}
