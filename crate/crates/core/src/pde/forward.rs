use super::operator::{assemble_operator, DiscreteOperator};
use super::tridiag::solve_tridiagonal;
use crate::error::{Error, Result};
use crate::model::{apply_matrix, Coefficient, ControlRegion, Field, Kernel, SpatialGrid, TimeGrid};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    #[default]
    ImplicitEuler,
    CrankNicolson,
}

/// Everything needed to advance the state or adjoint equation on a fixed grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub coef: Coefficient,
    pub grid: SpatialGrid,
    pub time: TimeGrid,
    pub region: ControlRegion,
    pub kernel: Kernel,
    pub op: DiscreteOperator,
    pub mask: Vec<f64>,
    kernel_levels: Option<Vec<Vec<f64>>>,
}

impl Problem {
    pub fn new(coef: Coefficient, grid: SpatialGrid, time: TimeGrid, region: ControlRegion, kernel: Kernel) -> Result<Self> {
        kernel.validate(&grid)?;
        let op = assemble_operator(&coef, &grid);
        let mask = region.mask(grid.nodes());
        let kernel_levels = if kernel.is_zero() {
            None
        } else {
            let mats = (0..time.levels())
                .map(|n| kernel.matrix(time.t(n), time.horizon(), &grid))
                .collect::<Result<Vec<_>>>()?;
            Some(mats)
        };
        Ok(Self { coef, grid, time, region, kernel, op, mask, kernel_levels })
    }

    pub fn with_kernel(&self, kernel: Kernel) -> Result<Self> {
        Self::new(self.coef.clone(), self.grid.clone(), self.time, self.region, kernel)
    }

    pub fn with_time(&self, time: TimeGrid, kernel: Kernel) -> Result<Self> {
        Self::new(self.coef.clone(), self.grid.clone(), time, self.region, kernel)
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn has_kernel(&self) -> bool {
        self.kernel_levels.is_some()
    }

    /// `int K(t_n, x, tau) y(tau) dtau` at level `n`.
    pub fn nonlocal(&self, n: usize, y: &[f64], transpose: bool) -> Vec<f64> {
        match &self.kernel_levels {
            None => vec![0.0; y.len()],
            Some(mats) => {
                let mut out = apply_matrix(&mats[n], y, &self.grid, transpose);
                self.op.restrict(&mut out);
                out
            }
        }
    }

    /// Applies `int K y dtau` level by level.
    pub fn nonlocal_field(&self, y: &Field, transpose: bool) -> Field {
        let mut out = Field::zeros(y.levels(), y.nodes());
        for n in 0..y.levels() {
            out.level_mut(n).copy_from_slice(&self.nonlocal(n, y.level(n), transpose));
        }
        out
    }

    pub fn norm(&self, y: &[f64]) -> f64 {
        self.op.norm(y)
    }

    /// Space-time `L^2(Q)` norm in the natural space, trapezoid in time.
    pub fn field_norm(&self, y: &Field) -> f64 {
        (0..y.levels()).map(|n| self.time.weight(n) * self.op.inner(y.level(n), y.level(n))).sum::<f64>().sqrt()
    }

    fn implicit_matrix(&self, factor: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let op = &self.op;
        let r = op.active();
        let lower: Vec<f64> = r.clone().map(|i| -factor * op.lower[i]).collect();
        let diag: Vec<f64> = r.clone().map(|i| 1.0 - factor * op.diag[i]).collect();
        let upper: Vec<f64> = r.map(|i| -factor * op.upper[i]).collect();
        (lower, diag, upper)
    }

    fn solve_implicit(&self, bands: &(Vec<f64>, Vec<f64>, Vec<f64>), rhs: &[f64]) -> Result<Vec<f64>> {
        let op = &self.op;
        let sub: Vec<f64> = op.active().map(|i| rhs[i]).collect();
        let sol = solve_tridiagonal(&bands.0, &bands.1, &bands.2, &sub)?;
        let mut out = vec![0.0; rhs.len()];
        for (k, i) in op.active().enumerate() {
            out[i] = sol[k];
        }
        Ok(out)
    }

    fn check_profile(&self, y: &[f64], what: &str) -> Result<Vec<f64>> {
        if y.len() != self.nodes() {
            return Err(Error::ShapeMismatch(format!("{what} has {} entries, grid has {}", y.len(), self.nodes())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what.into()));
        }
        let mut v = y.to_vec();
        self.op.restrict(&mut v);
        Ok(v)
    }

    /// Level-`n` forcing `f + 1_omega u`.
    fn forcing(&self, n: usize, f: Option<&Field>, u: Option<&Field>) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes()];
        if let Some(f) = f {
            out.iter_mut().zip(f.level(n)).for_each(|(o, v)| *o += v);
        }
        if let Some(u) = u {
            out.iter_mut().zip(u.level(n).iter().zip(&self.mask)).for_each(|(o, (v, m))| *o += m * v);
        }
        self.op.restrict(&mut out);
        out
    }
}

/// Solves `y_t - A y + int K y = f + 1_omega u`, `y(0) = y0`.
///
/// The nonlocal term is lagged by one step with implicit Euler, and evaluated at the midpoint after one
/// predictor pass with Crank-Nicolson.
pub fn solve_forward(pb: &Problem, y0: &[f64], f: Option<&Field>, u: Option<&Field>, stepper: Stepper) -> Result<Field> {
    let time = &pb.time;
    for (name, fld) in [("source", f), ("control", u)] {
        if let Some(fld) = fld {
            fld.check_shape(time, &pb.grid, name)?;
            if !fld.is_finite() {
                return Err(Error::NonFinite(name.into()));
            }
        }
    }
    let y0 = pb.check_profile(y0, "initial datum")?;
    let dt = time.dt();
    let mut out = Field::zeros(time.levels(), pb.nodes());
    out.level_mut(0).copy_from_slice(&y0);
    match stepper {
        Stepper::ImplicitEuler => {
            let bands = pb.implicit_matrix(dt);
            for n in 0..time.steps() {
                let y = out.level(n).to_vec();
                let g = pb.forcing(n + 1, f, u);
                let k = pb.nonlocal(n, &y, false);
                let rhs: Vec<f64> = (0..y.len()).map(|i| y[i] + dt * (g[i] - k[i])).collect();
                let next = pb.solve_implicit(&bands, &rhs)?;
                out.level_mut(n + 1).copy_from_slice(&next);
            }
        }
        Stepper::CrankNicolson => {
            let bands = pb.implicit_matrix(0.5 * dt);
            for n in 0..time.steps() {
                let y = out.level(n).to_vec();
                let ay = pb.op.apply(&y);
                let g0 = pb.forcing(n, f, u);
                let g1 = pb.forcing(n + 1, f, u);
                let k0 = pb.nonlocal(n, &y, false);
                let base: Vec<f64> =
                    (0..y.len()).map(|i| y[i] + 0.5 * dt * (ay[i] + g0[i] + g1[i])).collect();
                let pred_rhs: Vec<f64> = (0..y.len()).map(|i| base[i] - dt * k0[i]).collect();
                let mut next = pb.solve_implicit(&bands, &pred_rhs)?;
                if pb.has_kernel() {
                    let k1 = pb.nonlocal(n + 1, &next, false);
                    let rhs: Vec<f64> = (0..y.len()).map(|i| base[i] - 0.5 * dt * (k0[i] + k1[i])).collect();
                    next = pb.solve_implicit(&bands, &rhs)?;
                }
                out.level_mut(n + 1).copy_from_slice(&next);
            }
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("forward solution".into()));
    }
    Ok(out)
}

/// Solves `-v_t - A v + int K(t, tau, x) v(tau) dtau = g` backward from `v(T) = v_final`.
pub fn solve_adjoint(pb: &Problem, v_final: &[f64], g: Option<&Field>, stepper: Stepper) -> Result<Field> {
    let time = &pb.time;
    if let Some(g) = g {
        g.check_shape(time, &pb.grid, "adjoint source")?;
        if !g.is_finite() {
            return Err(Error::NonFinite("adjoint source".into()));
        }
    }
    let vt = pb.check_profile(v_final, "terminal datum")?;
    let dt = time.dt();
    let m = time.steps();
    let mut out = Field::zeros(time.levels(), pb.nodes());
    out.level_mut(m).copy_from_slice(&vt);
    let src = |n: usize| -> Vec<f64> {
        let mut s = g.map_or_else(|| vec![0.0; pb.nodes()], |g| g.level(n).to_vec());
        pb.op.restrict(&mut s);
        s
    };
    match stepper {
        Stepper::ImplicitEuler => {
            let bands = pb.implicit_matrix(dt);
            for n in (0..m).rev() {
                let v = out.level(n + 1).to_vec();
                let s = src(n);
                let k = pb.nonlocal(n + 1, &v, true);
                let rhs: Vec<f64> = (0..v.len()).map(|i| v[i] + dt * (s[i] - k[i])).collect();
                let prev = pb.solve_implicit(&bands, &rhs)?;
                out.level_mut(n).copy_from_slice(&prev);
            }
        }
        Stepper::CrankNicolson => {
            let bands = pb.implicit_matrix(0.5 * dt);
            for n in (0..m).rev() {
                let v = out.level(n + 1).to_vec();
                let av = pb.op.apply(&v);
                let (s0, s1) = (src(n), src(n + 1));
                let k1 = pb.nonlocal(n + 1, &v, true);
                let base: Vec<f64> = (0..v.len()).map(|i| v[i] + 0.5 * dt * (av[i] + s0[i] + s1[i])).collect();
                let pred_rhs: Vec<f64> = (0..v.len()).map(|i| base[i] - dt * k1[i]).collect();
                let mut prev = pb.solve_implicit(&bands, &pred_rhs)?;
                if pb.has_kernel() {
                    let k0 = pb.nonlocal(n, &prev, true);
                    let rhs: Vec<f64> = (0..v.len()).map(|i| base[i] - 0.5 * dt * (k0[i] + k1[i])).collect();
                    prev = pb.solve_implicit(&bands, &rhs)?;
                }
                out.level_mut(n).copy_from_slice(&prev);
            }
        }
    }
    if !out.is_finite() {
        return Err(Error::NonFinite("adjoint solution".into()));
    }
    Ok(out)
}
