use super::{Coefficient, SpatialGrid};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Spatial factor of a separable kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Factor {
    Constant { value: f64 },
    /// `amp * exp(1 - 1/(1 - r^2))` on `(lo, hi)`, zero elsewhere.
    Bump { lo: f64, hi: f64, amp: f64 },
    Sine { mode: u32, amp: f64 },
}

impl Factor {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Factor::Constant { value } => value,
            Factor::Bump { lo, hi, amp } => {
                if x <= lo || x >= hi {
                    return 0.0;
                }
                let r = (2.0 * x - lo - hi) / (hi - lo);
                amp * (1.0 - 1.0 / (1.0 - r * r)).exp()
            }
            Factor::Sine { mode, amp } => amp * (mode as f64 * std::f64::consts::PI * x).sin(),
        }
    }

    fn sup_abs(&self) -> f64 {
        match *self {
            Factor::Constant { value } => value.abs(),
            Factor::Bump { amp, .. } | Factor::Sine { amp, .. } => amp.abs(),
        }
    }
}

/// Kernel values `K(t, x, tau)` sampled on the grid nodes at a list of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub times: Vec<f64>,
    /// `values[k][i][j] = K(times[k], x_i, x_j)`.
    pub values: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelKind {
    Zero,
    /// `kappa0 * exp(-decay / (T - t)^2)`.
    ConstantDecay { kappa0: f64, decay: f64 },
    /// `f(x) g(tau) exp(-decay / (T - t)^2)`.
    SeparableDecay { space: Factor, memory: Factor, decay: f64 },
    Tabulated(KernelTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    /// When set, the kernel is cut to zero outside `support x support`.
    pub support: Option<(f64, f64)>,
    /// Absolute time of local `t = 0`; nonzero when a problem is restarted on a sub-horizon.
    #[serde(default)]
    pub time_offset: f64,
}

impl Kernel {
    pub fn zero() -> Self {
        Self { kind: KernelKind::Zero, support: None, time_offset: 0.0 }
    }

    pub fn new(kind: KernelKind) -> Self {
        Self { kind, support: None, time_offset: 0.0 }
    }

    pub fn restricted(mut self, lo: f64, hi: f64) -> Self {
        self.support = Some((lo, hi));
        self
    }

    pub fn shifted(&self, offset: f64) -> Self {
        let mut k = self.clone();
        k.time_offset += offset;
        k
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, KernelKind::Zero)
    }

    pub fn validate(&self, grid: &SpatialGrid) -> Result<()> {
        if let KernelKind::Tabulated(table) = &self.kind {
            if table.times.is_empty() || table.times.len() != table.values.len() {
                return Err(Error::InvalidKernel("table times and values differ in length".into()));
            }
            if table.times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidKernel("table times must increase".into()));
            }
            let n = grid.len();
            for slab in &table.values {
                if slab.len() != n || slab.iter().any(|r| r.len() != n) {
                    return Err(Error::ShapeMismatch(format!("kernel slab must be {n}x{n}")));
                }
            }
        }
        if let Some((lo, hi)) = self.support {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(Error::InvalidKernel(format!("support ({lo}, {hi}) not inside [0, 1]")));
            }
        }
        Ok(())
    }

    fn decay_factor(decay: f64, t: f64, horizon: f64) -> f64 {
        let r = horizon - t;
        if r <= 0.0 {
            if decay > 0.0 {
                0.0
            } else {
                1.0
            }
        } else {
            (-decay / (r * r)).exp()
        }
    }

    /// Matrix `K(t, x_i, x_j)` at local time `t` of a problem with local horizon `horizon`.
    pub fn matrix(&self, t: f64, horizon: f64, grid: &SpatialGrid) -> Result<Vec<f64>> {
        let n = grid.len();
        let x = grid.nodes();
        let mut m = vec![0.0; n * n];
        match &self.kind {
            KernelKind::Zero => return Ok(m),
            KernelKind::ConstantDecay { kappa0, decay } => {
                let v = kappa0 * Self::decay_factor(*decay, t, horizon);
                m.iter_mut().for_each(|e| *e = v);
            }
            KernelKind::SeparableDecay { space, memory, decay } => {
                let d = Self::decay_factor(*decay, t, horizon);
                let fx: Vec<f64> = x.iter().map(|&xi| space.value(xi)).collect();
                let gt: Vec<f64> = x.iter().map(|&xj| memory.value(xj)).collect();
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] = d * fx[i] * gt[j];
                    }
                }
            }
            KernelKind::Tabulated(table) => {
                let ta = t + self.time_offset;
                let times = &table.times;
                let tol = 1e-12 * (1.0 + ta.abs());
                if ta < times[0] - tol || ta > times[times.len() - 1] + tol {
                    return Err(Error::InvalidKernel(format!("tabulated kernel has no data at t = {ta}")));
                }
                let k = times.partition_point(|&s| s <= ta).clamp(1, times.len().max(2) - 1);
                let (k0, k1) = if times.len() == 1 { (0, 0) } else { (k - 1, k) };
                let w = if k0 == k1 { 0.0 } else { ((ta - times[k0]) / (times[k1] - times[k0])).clamp(0.0, 1.0) };
                for i in 0..n {
                    for j in 0..n {
                        m[i * n + j] = (1.0 - w) * table.values[k0][i][j] + w * table.values[k1][i][j];
                    }
                }
            }
        }
        if let Some((lo, hi)) = self.support {
            let inside = |x: f64| lo < x && x < hi;
            for i in 0..n {
                for j in 0..n {
                    if !(inside(x[i]) && inside(x[j])) {
                        m[i * n + j] = 0.0;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Largest `|K|` over a set of sample times, excluding the decay factor's effect where requested.
    pub fn sup_abs(&self, times: &[f64], horizon: f64, grid: &SpatialGrid) -> Result<f64> {
        match &self.kind {
            KernelKind::Zero => Ok(0.0),
            KernelKind::ConstantDecay { kappa0, .. } => Ok(kappa0.abs()),
            KernelKind::SeparableDecay { space, memory, .. } => Ok(space.sup_abs() * memory.sup_abs()),
            KernelKind::Tabulated(_) => {
                let mut s: f64 = 0.0;
                for &t in times {
                    s = self.matrix(t, horizon, grid)?.iter().fold(s, |m, v| m.max(v.abs()));
                }
                Ok(s)
            }
        }
    }

    /// Whether `K` vanishes outside `(lo, hi)^2` on the grid at all given times.
    pub fn supported_in(&self, lo: f64, hi: f64, times: &[f64], horizon: f64, grid: &SpatialGrid, tol: f64) -> Result<bool> {
        let x = grid.nodes();
        let n = grid.len();
        let inside = |x: f64| lo < x && x < hi;
        for &t in times {
            let m = self.matrix(t, horizon, grid)?;
            for i in 0..n {
                for j in 0..n {
                    if !(inside(x[i]) && inside(x[j])) && m[i * n + j].abs() > tol {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
}

/// `int_0^1 K(t, x, tau) y(tau) dtau` at every node, or the transposed action when `transpose` is set.
pub fn apply_nonlocal(
    kernel: &Kernel,
    y: &[f64],
    t: f64,
    horizon: f64,
    grid: &SpatialGrid,
    transpose: bool,
) -> Result<Vec<f64>> {
    let n = grid.len();
    if y.len() != n {
        return Err(Error::ShapeMismatch(format!("profile has {} entries, grid has {n}", y.len())));
    }
    if kernel.is_zero() {
        return Ok(vec![0.0; n]);
    }
    let m = kernel.matrix(t, horizon, grid)?;
    Ok(apply_matrix(&m, y, grid, transpose))
}

pub(crate) fn apply_matrix(m: &[f64], y: &[f64], grid: &SpatialGrid, transpose: bool) -> Vec<f64> {
    let n = grid.len();
    let q = grid.weights();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let kij = if transpose { m[j * n + i] } else { m[i * n + j] };
                    q[j] * kij * y[j]
                })
                .sum()
        })
        .collect()
}

/// Result of the weighted kernel bound `sup_t e^{c s/(T-t)^2} int int K^2 / a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelBound {
    pub value: f64,
    pub finite: bool,
    /// Set when the value is a sampled lower bound rather than an exact supremum.
    pub lower_bound_only: bool,
}

/// Evaluates `sup_{t<T} exp(c_exp s / (T-t)^2) int_0^1 int_0^1 K^2 / a(x) dtau dx`.
pub fn kernel_weighted_sup(
    kernel: &Kernel,
    coef: &Coefficient,
    grid: &SpatialGrid,
    c_exp: f64,
    s: f64,
    horizon: f64,
    sample_times: &[f64],
) -> Result<KernelBound> {
    let growth = c_exp * s;
    let x = grid.nodes();
    let n = grid.len();
    let spatial = |f: &dyn Fn(usize, usize) -> f64| -> f64 {
        // int_x (1/a(x)) int_tau f(x,tau)^2
        let inner: Vec<f64> =
            (0..n).map(|i| (0..n).map(|j| grid.weights()[j] * f(i, j).powi(2)).sum()).collect();
        super::quad::integral_over_a(&inner, coef, grid, 1.0)
    };
    let cut = |x: f64, tau: f64| -> f64 {
        match kernel.support {
            Some((lo, hi)) if !(lo < x && x < hi && lo < tau && tau < hi) => 0.0,
            _ => 1.0,
        }
    };
    let analytic = |decay: f64, f: &dyn Fn(usize, usize) -> f64| -> KernelBound {
        let mass = spatial(f);
        if mass == 0.0 {
            return KernelBound { value: 0.0, finite: true, lower_bound_only: false };
        }
        if 2.0 * decay >= growth && mass.is_finite() {
            KernelBound { value: mass, finite: true, lower_bound_only: false }
        } else {
            KernelBound { value: f64::INFINITY, finite: false, lower_bound_only: false }
        }
    };
    Ok(match &kernel.kind {
        KernelKind::Zero => KernelBound { value: 0.0, finite: true, lower_bound_only: false },
        KernelKind::ConstantDecay { kappa0, decay } => analytic(*decay, &|i, j| kappa0 * cut(x[i], x[j])),
        KernelKind::SeparableDecay { space, memory, decay } => {
            analytic(*decay, &|i, j| space.value(x[i]) * memory.value(x[j]) * cut(x[i], x[j]))
        }
        KernelKind::Tabulated(_) => {
            let mut best: f64 = 0.0;
            for &t in sample_times.iter().filter(|&&t| t < horizon) {
                let m = kernel.matrix(t, horizon, grid)?;
                let mass = spatial(&|i, j| m[i * n + j]);
                let r = horizon - t;
                best = best.max((growth / (r * r)).exp() * mass);
            }
            KernelBound { value: best, finite: best.is_finite(), lower_bound_only: true }
        }
    })
}
