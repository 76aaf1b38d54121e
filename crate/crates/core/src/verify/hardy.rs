use super::common::{random_profile, DEFAULT_SEED};
use crate::error::{Error, Result};
use crate::model::quad::integral_over_a;
use crate::model::{Coefficient, SpatialGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardyReport {
    /// `int y^2/a / int y_x^2` per sample; `None` for a zero profile.
    pub ratios: Vec<Option<f64>>,
    pub max: Option<f64>,
}

/// Ratio `int y^2/a / int y_x^2` for each sample profile.
///
/// The gradient integral is exact for the piecewise-linear interpolant.
pub fn check_hardy(coef: &Coefficient, grid: &SpatialGrid, samples: &[Vec<f64>]) -> Result<HardyReport> {
    let x = grid.nodes();
    let mut ratios = Vec::with_capacity(samples.len());
    for (k, y) in samples.iter().enumerate() {
        if y.len() != x.len() {
            return Err(Error::ShapeMismatch(format!("sample {k} has {} entries", y.len())));
        }
        let (first, last) = (y[0], y[y.len() - 1]);
        if first.abs() > 1e-12 || last.abs() > 1e-12 {
            return Err(Error::Config(format!("sample {k} does not vanish at the end points")));
        }
        let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
        let num = integral_over_a(&sq, coef, grid, 1.0);
        let den: f64 = (0..x.len() - 1).map(|i| (y[i + 1] - y[i]).powi(2) / (x[i + 1] - x[i])).sum();
        ratios.push(if den > 0.0 { Some(num / den) } else { None });
    }
    let max = ratios.iter().flatten().cloned().fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    Ok(HardyReport { ratios, max })
}

/// Hardy ratios of a seeded ensemble of random smooth profiles.
pub fn hardy_ensemble(coef: &Coefficient, grid: &SpatialGrid, members: usize, seed: Option<u64>) -> Result<HardyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(DEFAULT_SEED));
    let samples: Vec<Vec<f64>> = (0..members).map(|_| random_profile(&mut rng, grid)).collect();
    check_hardy(coef, grid, &samples)
}
