use super::forward::Problem;
use crate::error::{Error, Result};
use crate::model::Field;
use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenpairs of the discrete operator, orthonormal in the natural weighted space.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    /// Eigenvalues in increasing order.
    pub eigenvalues: Vec<f64>,
    /// Full-length nodal vectors, zero at Dirichlet nodes.
    pub modes: Vec<Vec<f64>>,
}

pub fn galerkin_eigenbasis(pb: &Problem, count: usize) -> Result<ModalBasis> {
    let op = &pb.op;
    let idx: Vec<usize> = op.active().collect();
    let dim = idx.len();
    if count == 0 || count > dim {
        return Err(Error::Parameter(format!("mode count {count} outside 1..={dim}")));
    }
    let sq: Vec<f64> = idx.iter().map(|&i| op.mass[i].sqrt()).collect();
    let mut c = DMatrix::<f64>::zeros(dim, dim);
    for (k, &i) in idx.iter().enumerate() {
        c[(k, k)] = -op.diag[i];
        if k + 1 < dim {
            // Symmetrised off-diagonal of M^{1/2} (-A) M^{-1/2}.
            let v = -op.upper[i] * sq[k] / sq[k + 1];
            c[(k, k + 1)] = v;
            c[(k + 1, k)] = v;
        }
    }
    let eig = SymmetricEigen::try_new(c.clone(), 1e-15, 10_000).ok_or_else(|| Error::Eigen("no convergence".into()))?;
    // Pair each vector with its own Rayleigh quotient rather than trusting the returned ordering.
    let mut pairs: Vec<(f64, usize)> = (0..dim)
        .map(|k| {
            let col = eig.eigenvectors.column(k);
            ((c.clone() * col).dot(&col) / col.dot(&col), k)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pb.nodes();
    let mut eigenvalues = Vec::with_capacity(count);
    let mut modes = Vec::with_capacity(count);
    for &(lambda, k) in pairs.iter().take(count) {
        let col = eig.eigenvectors.column(k);
        let scale = col.norm();
        let mut w = vec![0.0; n];
        for (j, &i) in idx.iter().enumerate() {
            w[i] = col[j] / (scale * sq[j]);
        }
        // Fix the sign so the first nonzero slope is positive.
        if let Some(&v) = w.iter().find(|v| v.abs() > 1e-12) {
            if v < 0.0 {
                w.iter_mut().for_each(|e| *e = -*e);
            }
        }
        eigenvalues.push(lambda);
        modes.push(w);
    }
    Ok(ModalBasis { eigenvalues, modes })
}

impl ModalBasis {
    pub fn project(&self, pb: &Problem, y: &[f64]) -> Vec<f64> {
        self.modes.iter().map(|w| pb.op.inner(w, y)).collect()
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.modes[0].len()];
        for (c, w) in coeffs.iter().zip(&self.modes) {
            out.iter_mut().zip(w).for_each(|(o, wi)| *o += c * wi);
        }
        out
    }
}

/// Implicit Euler on the modal system `alpha' + Lambda alpha = <f + 1_omega u - K y, w_k>`.
pub fn solve_galerkin(pb: &Problem, basis: &ModalBasis, y0: &[f64], f: Option<&Field>, u: Option<&Field>) -> Result<Field> {
    let time = &pb.time;
    for (name, fld) in [("source", f), ("control", u)] {
        if let Some(fld) = fld {
            fld.check_shape(time, &pb.grid, name)?;
        }
    }
    let dt = time.dt();
    let mut alpha = basis.project(pb, y0);
    let mut out = Field::zeros(time.levels(), pb.nodes());
    out.level_mut(0).copy_from_slice(&basis.reconstruct(&alpha));
    for n in 0..time.steps() {
        let y = out.level(n).to_vec();
        let k = pb.nonlocal(n, &y, false);
        let mut g: Vec<f64> = k.iter().map(|v| -v).collect();
        if let Some(f) = f {
            g.iter_mut().zip(f.level(n + 1)).for_each(|(o, v)| *o += v);
        }
        if let Some(u) = u {
            g.iter_mut().zip(u.level(n + 1).iter().zip(&pb.mask)).for_each(|(o, (v, m))| *o += m * v);
        }
        let gk = basis.project(pb, &g);
        for (j, a) in alpha.iter_mut().enumerate() {
            *a = (*a + dt * gk[j]) / (1.0 + dt * basis.eigenvalues[j]);
        }
        out.level_mut(n + 1).copy_from_slice(&basis.reconstruct(&alpha));
    }
    Ok(out)
}
