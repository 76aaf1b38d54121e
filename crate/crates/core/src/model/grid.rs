use crate::error::{Error, Result};
use serde::Serialize;

/// Nodes `0 = x_0 < ... < x_n = 1` with trapezoid quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SpatialGrid {
    pub fn uniform(n: usize) -> Result<Self> {
        Self::clustered(n, 1.0)
    }

    /// Geometric clustering toward `x = 0`: consecutive spacings satisfy `h_i / h_{i+1} = ratio`.
    pub fn clustered(n: usize, ratio: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidGrid(format!("need at least 4 cells, got {n}")));
        }
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidGrid(format!("clustering ratio {ratio} outside (0, 1]")));
        }
        let mut spacing: Vec<f64> = (0..n).map(|i| ratio.powi(-(i as i32))).collect();
        let total: f64 = spacing.iter().sum();
        spacing.iter_mut().for_each(|h| *h /= total);
        let mut nodes = Vec::with_capacity(n + 1);
        let mut x = 0.0;
        nodes.push(0.0);
        for h in &spacing[..n - 1] {
            x += h;
            nodes.push(x);
        }
        nodes.push(1.0);
        Self::from_nodes(nodes)
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < 5 {
            return Err(Error::InvalidGrid("need at least 5 nodes".into()));
        }
        if nodes[0] != 0.0 || nodes[n - 1] != 1.0 {
            return Err(Error::InvalidGrid("nodes must span [0, 1]".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("nodes must be strictly increasing".into()));
        }
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            weights[i] += 0.5 * h;
            weights[i + 1] += 0.5 * h;
        }
        Ok(Self { nodes, weights })
    }

    /// Number of cells.
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn x(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Trapezoid weight attached to node `i`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Width of cell `(x_{i-1}, x_i)`, for `1 <= i <= n`.
    pub fn h(&self, i: usize) -> f64 {
        self.nodes[i] - self.nodes[i - 1]
    }

    pub fn max_spacing(&self) -> f64 {
        (1..self.len()).map(|i| self.h(i)).fold(0.0, f64::max)
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Grid with every cell split in two.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(1.0);
        Self::from_nodes(nodes).expect("refinement of a valid grid is valid")
    }
}

/// Uniform time levels `t_n = n T / m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!("horizon {horizon} must be positive")));
        }
        if steps < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 time steps, got {steps}")));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn levels(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn t(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.dt()
        }
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt()
    }

    /// Trapezoid weight of level `n`.
    pub fn weight(&self, n: usize) -> f64 {
        if n == 0 || n == self.steps {
            0.5 * self.dt()
        } else {
            self.dt()
        }
    }

    pub fn refined(&self) -> Self {
        Self { horizon: self.horizon, steps: 2 * self.steps }
    }
}

/// Space-time array indexed by time level then spatial node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field {
    levels: usize,
    nodes: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(levels: usize, nodes: usize) -> Self {
        Self { levels, nodes, data: vec![0.0; levels * nodes] }
    }

    pub fn from_fn(time: &TimeGrid, grid: &SpatialGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(time.levels(), grid.len());
        for n in 0..time.levels() {
            let t = time.t(n);
            for (i, &x) in grid.nodes().iter().enumerate() {
                out.data[n * grid.len() + i] = f(t, x);
            }
        }
        out
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let levels = rows.len();
        let nodes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nodes) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Ok(Self { levels, nodes, data: rows.into_iter().flatten().collect() })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn level(&self, n: usize) -> &[f64] {
        &self.data[n * self.nodes..(n + 1) * self.nodes]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.nodes..(n + 1) * self.nodes]
    }

    pub fn get(&self, n: usize, i: usize) -> f64 {
        self.data[n * self.nodes + i]
    }

    pub fn set(&mut self, n: usize, i: usize, v: f64) {
        self.data[n * self.nodes + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.nodes)
    }

    pub fn check_shape(&self, time: &TimeGrid, grid: &SpatialGrid, what: &str) -> Result<()> {
        if self.levels != time.levels() || self.nodes != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{what} is {}x{}, expected {}x{}",
                self.levels,
                self.nodes,
                time.levels(),
                grid.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_weights_are_trapezoidal() {
        let t = TimeGrid::new(2.0, 4).unwrap();
        let w: Vec<f64> = (0..t.levels()).map(|n| t.weight(n)).collect();
        assert_eq!(w, vec![0.25, 0.5, 0.5, 0.5, 0.25]);
        assert_eq!(t.t(4), 2.0);
    }

    #[test]
    fn field_rows_must_agree() {
        assert!(Field::from_rows(vec![vec![0.0; 3], vec![0.0; 2]]).is_err());
        let f = Field::from_rows(vec![vec![1.0, -2.0], vec![0.5, 0.0]]).unwrap();
        assert_eq!((f.levels(), f.nodes(), f.max_abs()), (2, 2, 2.0));
    }
}
