use super::band::PentaCholesky;
use nalgebra::{linalg::Cholesky, DMatrix, DVector, Dyn};
use crate::error::Result;
use crate::model::Field;
use crate::pde::Problem;
use crate::weights::WeightSet;

/// Discrete penalised-HUM bilinear form
///
/// `kappa(v, w) = sum_n dt <e^{2 s Phi~} (L* v)^n, (L* w)^n> + sum_n dt <1_omega s^3 nu^3 e^{2 s Phi~} v^n, w^n>`
///
/// over the levels `n = 1..=m`, with the backward-Euler collocation
/// `(L* v)^n = -(v^{n+1} - v^n)/dt - A v^n` (and `v^{m+1} = 0`), pairings in the natural space.
/// This is the exact transpose of the implicit Euler state scheme, so the state
/// `y^n = e^{2 s Phi~} (L* v)^n` solves that scheme with the control `-1_omega s^3 nu^3 e^{2 s Phi~} v^n`.
///
/// Unknowns live on levels `1..=m`; level 0 is kept in the arrays and stays zero. They are handled
/// through a diagonal rescaling `v = e^{shift} S z` with unit algebraic diagonal, and the scaled
/// operator is assembled entry by entry in log space so that the extreme range of the weights is
/// never represented directly.
pub struct Kappa<'a> {
    pub pb: &'a Problem,
    pub weights: &'a WeightSet,
    nodes: usize,
    levels: usize,
    dt: f64,
    /// Clamped `2 s Phi~` at the levels.
    pub(crate) exponent: Vec<f64>,
    /// `ln(dt |cell| e^{2 s Phi~}) + shift`.
    log_omega: Vec<f64>,
    /// `ln(dt |cell| s^3 nu^3 e^{2 s Phi~}) + shift` on the control set, `-inf` elsewhere.
    log_obs: Vec<f64>,
    /// `ln S`.
    log_scale: Vec<f64>,
    /// Constant added to every log-weight; the scaled problem does not depend on it.
    pub(crate) shift: f64,
    /// Scaled diagonal blocks `[K_ii, K_i,i+1, K_i,i+2]` per active row.
    diag_blocks: Vec<Vec<[f64; 3]>>,
    /// Scaled coupling of level `n` (rows) to `n + 1` (columns), offsets -1..=1.
    upper_blocks: Vec<Vec<[f64; 3]>>,
    factors: Vec<PentaCholesky>,
    regularization: f64,
    exact: Option<BlockCholesky>,
}

/// Smallest Tikhonov shift tried on the unit-diagonal scaled operator. Late, unobserved directions
/// are otherwise numerically null.
pub const MIN_REGULARIZATION: f64 = 1e-14;

/// Entries beyond which the dense block factorisation is skipped.
const DENSE_LIMIT: usize = 60_000_000;

/// Block `LDL^T` factorisation of the scaled operator, tridiagonal in time with dense Schur complements.
struct BlockCholesky {
    schur: Vec<Cholesky<f64, Dyn>>,
    upper: Vec<DMatrix<f64>>,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Cholesky with a growing diagonal shift when rounding makes a Schur complement indefinite.
fn robust_cholesky(d: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = d.diagonal().iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut shift = 0.0;
    for _ in 0..8 {
        let mut m = d.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        if let Some(c) = Cholesky::new(m) {
            return Some(c);
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
    }
    None
}

impl<'a> Kappa<'a> {
    pub fn new(pb: &'a Problem, weights: &'a WeightSet) -> Result<Self> {
        Self::with_regularization(pb, weights, MIN_REGULARIZATION)
    }

    /// Builds the operator with a Tikhonov shift `regularization` on the scaled system.
    pub fn with_regularization(pb: &'a Problem, weights: &'a WeightSet, regularization: f64) -> Result<Self> {
        let time = &pb.time;
        let (nodes, levels, dt) = (pb.nodes(), time.levels(), time.dt());
        let s = weights.params.s;
        let op = &pb.op;
        let mut exponent = vec![0.0; levels * nodes];
        let mut log_omega = vec![f64::NEG_INFINITY; levels * nodes];
        let mut log_obs = vec![f64::NEG_INFINITY; levels * nodes];
        for n in 1..levels {
            let t = time.t(n);
            let nu = weights.nu(t);
            for i in op.active() {
                let e = weights.log_exp_big_tilde(t, i);
                let base = (dt * op.mass[i]).ln();
                exponent[n * nodes + i] = e;
                log_omega[n * nodes + i] = base + e;
                if pb.mask[i] > 0.0 && nu.is_finite() {
                    log_obs[n * nodes + i] = base + 3.0 * (s * nu).ln() + e;
                }
            }
        }
        let shift = -log_omega.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        log_omega.iter_mut().chain(log_obs.iter_mut()).for_each(|v| *v += shift);
        let mut kappa = Self {
            pb,
            weights,
            nodes,
            levels,
            dt,
            exponent,
            log_omega,
            log_obs,
            log_scale: vec![0.0; levels * nodes],
            shift,
            diag_blocks: Vec::new(),
            upper_blocks: Vec::new(),
            factors: Vec::new(),
            regularization,
            exact: None,
        };
        kappa.build_scaling();
        kappa.build_blocks()?;
        let dim = pb.op.last - pb.op.first + 1;
        if dim * dim * levels <= DENSE_LIMIT {
            kappa.exact = kappa.factor_exact();
        }
        Ok(kappa)
    }

    /// Whether the exact block factorisation is used as preconditioner.
    pub fn has_exact_preconditioner(&self) -> bool {
        self.exact.is_some()
    }

    /// True when the grid is small enough for the exact block factorisation but it broke down.
    pub fn factorization_failed(&self) -> bool {
        let dim = self.pb.op.last - self.pb.op.first + 1;
        self.exact.is_none() && dim * dim * self.levels <= DENSE_LIMIT
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Row `j` of `I/dt - A` as `(column, value)` pairs.
    fn row(&self, j: usize) -> Vec<(usize, f64)> {
        let op = &self.pb.op;
        let mut entries = Vec::with_capacity(3);
        if j > op.first {
            entries.push((j - 1, -op.lower[j]));
        }
        entries.push((j, 1.0 / self.dt - op.diag[j]));
        if j < op.last {
            entries.push((j + 1, -op.upper[j]));
        }
        entries
    }

    fn build_scaling(&mut self) {
        let op = &self.pb.op;
        let nn = self.nodes;
        let two_ln_inv_dt = -2.0 * self.dt.ln();
        for n in 1..self.levels {
            for i in op.active() {
                let mut terms = Vec::with_capacity(5);
                // Column i of I/dt - A at level n.
                if i > op.first {
                    terms.push(self.log_omega[n * nn + i - 1] + 2.0 * op.upper[i - 1].abs().ln());
                }
                terms.push(self.log_omega[n * nn + i] + 2.0 * (1.0 / self.dt - op.diag[i]).ln());
                if i < op.last {
                    terms.push(self.log_omega[n * nn + i + 1] + 2.0 * op.lower[i + 1].abs().ln());
                }
                // -I/dt from the previous level's residual.
                if n >= 2 {
                    terms.push(self.log_omega[(n - 1) * nn + i] + two_ln_inv_dt);
                }
                terms.push(self.log_obs[n * nn + i]);
                self.log_scale[n * nn + i] = -0.5 * log_sum_exp(&terms);
            }
        }
    }

    fn build_blocks(&mut self) -> Result<()> {
        let op = &self.pb.op;
        let first = op.first;
        let dim = op.last - first + 1;
        let nn = self.nodes;
        let inv_dt = 1.0 / self.dt;
        let mut diag = vec![vec![[0.0; 3]; dim]; self.levels];
        let mut upper = vec![vec![[0.0; 3]; dim]; self.levels];
        let ls = |n: usize, i: usize| self.log_scale[n * nn + i];
        for n in 1..self.levels {
            for j in op.active() {
                let lw = self.log_omega[n * nn + j];
                let row = self.row(j);
                for &(c1, x1) in &row {
                    for &(c2, x2) in &row {
                        if c2 >= c1 {
                            diag[n][c1 - first][c2 - c1] += x1 * x2 * (lw + ls(n, c1) + ls(n, c2)).exp();
                        }
                    }
                    if n + 1 < self.levels {
                        // (I/dt - A) v^n paired with -v^{n+1}/dt.
                        upper[n][c1 - first][j + 1 - c1] -= x1 * inv_dt * (lw + ls(n, c1) + ls(n + 1, j)).exp();
                    }
                }
                if n + 1 < self.levels {
                    diag[n + 1][j - first][0] += inv_dt * inv_dt * (lw + 2.0 * ls(n + 1, j)).exp();
                }
            }
            for i in op.active() {
                let lo = self.log_obs[n * nn + i];
                if lo > f64::NEG_INFINITY {
                    diag[n][i - first][0] += (lo + 2.0 * ls(n, i)).exp();
                }
            }
        }
        for b in diag[0].iter_mut() {
            b[0] = 1.0;
        }
        for level in diag.iter_mut().skip(1) {
            for b in level.iter_mut() {
                b[0] += self.regularization;
            }
        }
        self.factors = diag.iter().map(|b| PentaCholesky::factor(b)).collect::<Result<_>>()?;
        self.diag_blocks = diag;
        self.upper_blocks = upper;
        Ok(())
    }

    /// `(L* v)^n` for `n = 0..=m`, with `v^{m+1} = 0`.
    pub fn adjoint_residual(&self, v: &[f64]) -> Vec<f64> {
        let nn = self.nodes;
        let op = &self.pb.op;
        let mut out = vec![0.0; v.len()];
        for n in 0..self.levels {
            let vn = &v[n * nn..(n + 1) * nn];
            let av = op.apply(vn);
            for i in op.active() {
                let next = if n + 1 < self.levels { v[(n + 1) * nn + i] } else { 0.0 };
                out[n * nn + i] = -(next - vn[i]) / self.dt - av[i];
            }
        }
        out
    }

    /// Algebraic action `K v`, i.e. `(K v) . w = kappa(v, w)`; only levels `1..=m` take part.
    pub fn apply_algebraic(&self, v: &[f64]) -> Vec<f64> {
        let nn = self.nodes;
        let op = &self.pb.op;
        let mut vv = v.to_vec();
        vv[..nn].iter_mut().for_each(|x| *x = 0.0);
        let lv = self.adjoint_residual(&vv);
        let unshift = -self.shift;
        let r: Vec<f64> = lv
            .iter()
            .zip(&self.log_omega)
            .map(|(l, lw)| if *l == 0.0 { 0.0 } else { l * (lw + unshift).exp() })
            .collect();
        let mut out = vec![0.0; v.len()];
        for n in 1..self.levels {
            let rn = &r[n * nn..(n + 1) * nn];
            let at = op.apply_transpose(rn);
            for i in op.active() {
                out[n * nn + i] += rn[i] / self.dt - at[i];
                if n + 1 < self.levels {
                    out[(n + 1) * nn + i] -= rn[i] / self.dt;
                }
                let lo = self.log_obs[n * nn + i];
                if lo > f64::NEG_INFINITY && vv[n * nn + i] != 0.0 {
                    out[n * nn + i] += (lo + unshift).exp() * vv[n * nn + i];
                }
            }
        }
        out
    }

    pub fn bilinear(&self, v1: &[f64], v2: &[f64]) -> f64 {
        self.apply_algebraic(v1).iter().zip(v2).map(|(a, b)| a * b).sum()
    }

    /// Quadrature weight of the discrete space-time inner product.
    pub fn st_weight(&self, n: usize, i: usize) -> f64 {
        if n >= 1 && self.pb.op.is_active(i) {
            self.dt * self.pb.op.mass[i]
        } else {
            0.0
        }
    }

    /// Riesz representative of `kappa(v, .)` in the discrete space-time inner product.
    pub fn apply_riesz(&self, v: &[f64]) -> Vec<f64> {
        let nn = self.nodes;
        self.apply_algebraic(v)
            .iter()
            .enumerate()
            .map(|(idx, x)| {
                let w = self.st_weight(idx / nn, idx % nn);
                if w == 0.0 {
                    0.0
                } else {
                    x / w
                }
            })
            .collect()
    }

    /// Algebraic right-hand side: `b . w = sum_{n>=1} dt <f^n, w^n> + <y0, w^1>`.
    pub fn ell(&self, y0: &[f64], f: Option<&Field>) -> Vec<f64> {
        let nn = self.nodes;
        let op = &self.pb.op;
        let mut b = vec![0.0; self.levels * nn];
        for i in op.active() {
            b[nn + i] = op.mass[i] * y0[i];
        }
        if let Some(f) = f {
            for n in 1..self.levels {
                for i in op.active() {
                    b[n * nn + i] += self.dt * op.mass[i] * f.get(n, i);
                }
            }
        }
        b
    }

    /// Riesz representative of [`Kappa::ell`].
    pub fn ell_riesz(&self, y0: &[f64], f: Option<&Field>) -> Vec<f64> {
        let nn = self.nodes;
        self.ell(y0, f)
            .iter()
            .enumerate()
            .map(|(idx, x)| {
                let w = self.st_weight(idx / nn, idx % nn);
                if w == 0.0 {
                    0.0
                } else {
                    x / w
                }
            })
            .collect()
    }

    pub fn scale(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.log_scale).map(|(v, l)| if *v == 0.0 { 0.0 } else { v * l.exp() }).collect()
    }

    /// `(S K S + delta I) z` up to the constant factor `e^{shift}`, from the assembled blocks.
    pub fn apply_scaled(&self, z: &[f64]) -> Vec<f64> {
        let nn = self.nodes;
        let op = &self.pb.op;
        let (lo, hi) = (op.first, op.last);
        let mut out = vec![0.0; z.len()];
        for n in 1..self.levels {
            let zn = &z[n * nn..(n + 1) * nn];
            let d = &self.diag_blocks[n];
            for i in lo..=hi {
                let r = i - lo;
                let mut v = d[r][0] * zn[i];
                for off in 1..=2 {
                    if i + off <= hi {
                        v += d[r][off] * zn[i + off];
                    }
                    if i >= lo + off {
                        v += d[r - off][off] * zn[i - off];
                    }
                }
                out[n * nn + i] += v;
            }
            if n + 1 < self.levels {
                let up = &self.upper_blocks[n];
                for i in lo..=hi {
                    for off in 0..3 {
                        let c = i + off;
                        if c < 1 || c - 1 < lo || c - 1 > hi {
                            continue;
                        }
                        let c = c - 1;
                        let e = up[i - lo][off];
                        out[n * nn + i] += e * z[(n + 1) * nn + c];
                        out[(n + 1) * nn + c] += e * zn[i];
                    }
                }
            }
        }
        out
    }

    /// `S K S z` without the regularisation, up to the factor `e^{shift}`.
    pub fn apply_scaled_exact(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.apply_scaled(z);
        let nn = self.nodes;
        for (idx, v) in out.iter_mut().enumerate().skip(nn) {
            if self.pb.op.is_active(idx % nn) {
                *v -= self.regularization * z[idx];
            }
        }
        out
    }

    fn dense_diag(&self, n: usize) -> DMatrix<f64> {
        let b = &self.diag_blocks[n];
        let dim = b.len();
        let mut d = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for off in 0..3 {
                if r + off < dim {
                    d[(r, r + off)] = b[r][off];
                    d[(r + off, r)] = b[r][off];
                }
            }
        }
        d
    }

    fn dense_upper(&self, n: usize) -> DMatrix<f64> {
        let b = &self.upper_blocks[n];
        let dim = b.len();
        let mut u = DMatrix::zeros(dim, dim);
        for r in 0..dim {
            for off in 0..3 {
                if r + off >= 1 && r + off - 1 < dim {
                    u[(r, r + off - 1)] = b[r][off];
                }
            }
        }
        u
    }

    fn factor_exact(&self) -> Option<BlockCholesky> {
        let mut schur = Vec::with_capacity(self.levels);
        let mut upper = Vec::with_capacity(self.levels);
        let mut carry: Option<DMatrix<f64>> = None;
        for n in 1..self.levels {
            let mut d = self.dense_diag(n);
            if let Some(c) = carry.take() {
                d -= c;
            }
            let d = (&d + d.transpose()) * 0.5;
            let chol = robust_cholesky(d)?;
            if n + 1 < self.levels {
                let u = self.dense_upper(n);
                let x = chol.solve(&u);
                carry = Some(u.transpose() * x);
                upper.push(u);
            }
            schur.push(chol);
        }
        Some(BlockCholesky { schur, upper })
    }

    /// Preconditioner of the scaled operator: the exact block factorisation when available,
    /// block Jacobi otherwise.
    pub fn precondition(&self, r: &[f64]) -> Vec<f64> {
        if let Some(bc) = &self.exact {
            return self.solve_exact(bc, r);
        }
        let nn = self.nodes;
        let op = &self.pb.op;
        let mut out = vec![0.0; r.len()];
        for n in 1..self.levels {
            let mut b: Vec<f64> = op.active().map(|i| r[n * nn + i]).collect();
            self.factors[n].solve_in_place(&mut b);
            for (k, i) in op.active().enumerate() {
                out[n * nn + i] = b[k];
            }
        }
        out
    }

    fn solve_exact(&self, bc: &BlockCholesky, r: &[f64]) -> Vec<f64> {
        let nn = self.nodes;
        let op = &self.pb.op;
        let steps = self.levels - 1;
        let take = |n: usize| DVector::from_iterator(op.last - op.first + 1, op.active().map(|i| r[n * nn + i]));
        let mut y: Vec<DVector<f64>> = Vec::with_capacity(steps);
        for k in 0..steps {
            let mut rk = take(k + 1);
            if k > 0 {
                let prev = bc.schur[k - 1].solve(&y[k - 1]);
                rk -= bc.upper[k - 1].transpose() * prev;
            }
            y.push(rk);
        }
        let mut x: Vec<DVector<f64>> = vec![DVector::zeros(0); steps];
        for k in (0..steps).rev() {
            let mut rhs = y[k].clone();
            if k + 1 < steps {
                rhs -= &bc.upper[k] * &x[k + 1];
            }
            x[k] = bc.schur[k].solve(&rhs);
        }
        let mut out = vec![0.0; r.len()];
        for (k, xk) in x.iter().enumerate() {
            for (c, i) in op.active().enumerate() {
                out[(k + 1) * nn + i] = xk[c];
            }
        }
        out
    }

    /// `ln` of the physical dual `e^{shift} S` factor at `(n, i)`.
    fn log_dual_factor(&self, n: usize, i: usize) -> f64 {
        self.shift + self.log_scale[n * self.nodes + i]
    }

    /// Physical dual variable `e^{shift} S z`.
    pub fn dual_from_scaled(&self, z: &[f64]) -> Vec<f64> {
        let nn = self.nodes;
        z.iter()
            .enumerate()
            .map(|(idx, v)| if *v == 0.0 { 0.0 } else { v * self.log_dual_factor(idx / nn, idx % nn).exp() })
            .collect()
    }

    /// Weighted state `e^{s Phi~} L* v` and state `e^{2 s Phi~} L* v` at the levels, computed term
    /// by term in log space.
    pub(crate) fn states_from_scaled(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nn = self.nodes;
        let inv_dt = 1.0 / self.dt;
        let mut weighted = vec![0.0; z.len()];
        let mut state = vec![0.0; z.len()];
        for n in 1..self.levels {
            for j in self.pb.op.active() {
                let e = self.exponent[n * nn + j];
                let mut terms: Vec<(f64, f64)> = self
                    .row(j)
                    .into_iter()
                    .map(|(c, x)| (x * z[n * nn + c], self.log_dual_factor(n, c)))
                    .collect();
                if n + 1 < self.levels {
                    terms.push((-inv_dt * z[(n + 1) * nn + j], self.log_dual_factor(n + 1, j)));
                }
                let (mut wv, mut sv) = (0.0, 0.0);
                for (coef, lf) in terms {
                    if coef != 0.0 {
                        wv += coef * (0.5 * e + lf).exp();
                        sv += coef * (e + lf).exp();
                    }
                }
                weighted[n * nn + j] = wv;
                state[n * nn + j] = sv;
            }
        }
        (weighted, state)
    }

    /// Control `-1_omega s^3 nu^3 e^{2 s Phi~} v` from the scaled dual variable.
    pub(crate) fn control_from_scaled(&self, z: &[f64]) -> Vec<f64> {
        let nn = self.nodes;
        let s = self.weights.params.s;
        let mut out = vec![0.0; z.len()];
        for n in 1..self.levels {
            let nu = self.weights.nu(self.pb.time.t(n));
            if !nu.is_finite() {
                continue;
            }
            for i in self.pb.op.active() {
                let zv = z[n * nn + i];
                if self.pb.mask[i] > 0.0 && zv != 0.0 {
                    let g = 3.0 * (s * nu).ln() + self.exponent[n * nn + i];
                    out[n * nn + i] = -zv * (g + self.log_dual_factor(n, i)).exp();
                }
            }
        }
        out
    }

    /// `kappa(v, v)` for `v = e^{shift} S z`, without the regularisation.
    pub(crate) fn energy_scaled(&self, z: &[f64]) -> f64 {
        let kz = self.apply_scaled(z);
        let quad: f64 = kz.iter().zip(z).map(|(a, b)| a * b).sum();
        let reg: f64 = z.iter().map(|v| v * v).sum::<f64>() * self.regularization;
        (quad - reg) * self.shift.exp()
    }
}
