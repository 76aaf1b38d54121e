use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CgOutcome {
    #[serde(skip)]
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final preconditioned residual `sqrt(r.Pr / b.Pb)`, the relative energy-norm error when the
    /// preconditioner is exact.
    pub residual: f64,
    pub history: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for a symmetric positive definite operator.
///
/// Stops on the preconditioned residual norm. `observe` is called with each iterate, including the zero starting guess.
pub fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(&[f64]),
) -> Result<CgOutcome> {
    let n = rhs.len();
    let bnorm = dot(rhs, rhs).sqrt();
    let mut x = vec![0.0; n];
    observe(&x);
    if bnorm == 0.0 {
        return Ok(CgOutcome { solution: x, iterations: 0, residual: 0.0, history: vec![0.0] });
    }
    let mut r = rhs.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let rz0 = rz;
    if !(rz0 > 0.0) {
        return Err(Error::NonFinite(format!("preconditioned right-hand side norm {rz0:e}")));
    }
    let mut history = vec![1.0];
    for it in 1..=max_iter {
        let q = apply(&p);
        let pq = dot(&p, &q);
        if !(pq > 0.0) || !pq.is_finite() {
            return Err(Error::NonFinite(format!("conjugate gradient curvature {pq:e} at iteration {it}")));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        observe(&x);
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let res = (rz_new.max(0.0) / rz0).sqrt();
        history.push(res);
        if res <= tol {
            return Ok(CgOutcome { solution: x, iterations: it, residual: res, history });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::CgNotConverged { iterations: max_iter, residual: *history.last().unwrap() })
}
