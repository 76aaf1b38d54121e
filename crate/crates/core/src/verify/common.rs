use crate::error::Result;
use crate::model::{Field, SpatialGrid};
use crate::pde::{solve_adjoint, Problem, Stepper};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

pub const DEFAULT_SEED: u64 = 20250101;

/// Streaming sum of positive terms `value * e^{log_weight}` kept in log space.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogSum {
    /// Adds `value * e^{log_weight}` for `value >= 0`.
    pub fn add(&mut self, value: f64, log_weight: f64) {
        if !(value > 0.0) || log_weight == f64::NEG_INFINITY {
            return;
        }
        let l = value.ln() + log_weight;
        if l > self.max {
            self.scaled = self.scaled * (self.max - l).exp() + 1.0;
            self.max = l;
        } else {
            self.scaled += (l - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: &LogSum) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        self.add(other.scaled, other.max);
    }

    /// Natural log of the sum, `-inf` when empty.
    pub fn ln(&self) -> f64 {
        if self.scaled > 0.0 {
            self.max + self.scaled.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn value(&self) -> f64 {
        self.ln().exp()
    }

    pub fn is_zero(&self) -> bool {
        self.max == f64::NEG_INFINITY
    }
}

/// Second-order nodal derivative, one-sided at both ends.
pub fn gradient(y: &[f64], grid: &SpatialGrid) -> Vec<f64> {
    let x = grid.nodes();
    let n = x.len();
    let three_point = |i0: usize, at: usize| -> f64 {
        // Derivative at x[at] of the quadratic through nodes i0..i0+3.
        let (a, b, c) = (x[i0], x[i0 + 1], x[i0 + 2]);
        let t = x[at];
        let la = ((t - b) + (t - c)) / ((a - b) * (a - c));
        let lb = ((t - a) + (t - c)) / ((b - a) * (b - c));
        let lc = ((t - a) + (t - b)) / ((c - a) * (c - b));
        la * y[i0] + lb * y[i0 + 1] + lc * y[i0 + 2]
    };
    (0..n)
        .map(|i| {
            if i == 0 {
                three_point(0, 0)
            } else if i == n - 1 {
                three_point(n - 3, n - 1)
            } else {
                three_point(i - 1, i)
            }
        })
        .collect()
}

/// Coefficients of a random smooth sine series with decaying amplitudes.
pub fn random_coefficients(rng: &mut ChaCha8Rng, modes: usize, decay: f64) -> Vec<f64> {
    (1..=modes)
        .map(|k| {
            let z: f64 = StandardNormal.sample(rng);
            z / (k as f64).powf(decay)
        })
        .collect()
}

pub fn sine_series(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * PI * x).sin()).sum()
}

/// Random smooth profile vanishing at both ends.
pub fn random_profile(rng: &mut ChaCha8Rng, grid: &SpatialGrid) -> Vec<f64> {
    let c = random_coefficients(rng, 8, 2.0);
    grid.sample(|x| sine_series(&c, x))
}

/// An adjoint solution together with the source that produced it.
#[derive(Debug, Clone)]
pub struct AdjointMember {
    pub index: usize,
    pub solution: Field,
    /// Source of `v_t + A v = g`.
    pub source: Field,
}

/// Random smooth data defined as functions, so the same members can be sampled on any grid.
#[derive(Debug, Clone)]
pub(crate) struct MemberData {
    terminal: Vec<f64>,
    source_space: Vec<f64>,
    source_freq: f64,
    source_phase: f64,
}

pub(crate) fn member_data(seed: u64, count: usize, with_source: bool) -> Vec<MemberData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let terminal = random_coefficients(&mut rng, 6, 1.5);
            let source_space = if with_source { random_coefficients(&mut rng, 4, 1.5) } else { vec![] };
            MemberData {
                terminal,
                source_space,
                source_freq: rng.gen_range(0.5..2.0),
                source_phase: rng.gen_range(0.0..PI),
            }
        })
        .collect()
}

/// Adjoint solutions from random terminal data and sources, deterministic for a given seed and
/// independent of the grid.
///
/// The solutions satisfy `v_t + A v - int K(t, tau, x) v(tau) dtau = g` backward in time.
pub fn adjoint_ensemble(pb: &Problem, count: usize, seed: u64, with_source: bool) -> Result<Vec<AdjointMember>> {
    use rayon::prelude::*;
    let data = member_data(seed, count, with_source);
    let horizon = pb.time.horizon();
    data.par_iter()
        .enumerate()
        .map(|(index, d)| {
            let terminal = pb.grid.sample(|x| sine_series(&d.terminal, x));
            let source = Field::from_fn(&pb.time, &pb.grid, |t, x| {
                if d.source_space.is_empty() {
                    0.0
                } else {
                    sine_series(&d.source_space, x) * (2.0 * PI * d.source_freq * t / horizon + d.source_phase).sin()
                }
            });
            let mut solver_source = source.clone();
            solver_source.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
            let solution = solve_adjoint(pb, &terminal, Some(&solver_source), Stepper::CrankNicolson)?;
            Ok(AdjointMember { index, solution, source })
        })
        .collect()
}
