use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Control interval together with a nested observation interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRegion {
    pub lo: f64,
    pub hi: f64,
    pub inner_lo: f64,
    pub inner_hi: f64,
}

impl ControlRegion {
    pub fn new(lo: f64, hi: f64, inner_lo: f64, inner_hi: f64) -> Result<Self> {
        let ok = 0.0 <= lo && lo < inner_lo && inner_lo < inner_hi && inner_hi < hi && hi <= 1.0;
        if !ok {
            return Err(Error::InvalidRegion(format!(
                "need 0 <= {lo} < {inner_lo} < {inner_hi} < {hi} <= 1"
            )));
        }
        Ok(Self { lo, hi, inner_lo, inner_hi })
    }

    /// Uses the middle half of the control interval as the observation interval.
    pub fn with_default_inner(lo: f64, hi: f64) -> Result<Self> {
        let w = hi - lo;
        Self::new(lo, hi, lo + 0.25 * w, hi - 0.25 * w)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn inner_contains(&self, x: f64) -> bool {
        self.inner_lo < x && x < self.inner_hi
    }

    pub fn inner_center(&self) -> f64 {
        0.5 * (self.inner_lo + self.inner_hi)
    }

    pub fn mask(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&x| if self.contains(x) { 1.0 } else { 0.0 }).collect()
    }
}
