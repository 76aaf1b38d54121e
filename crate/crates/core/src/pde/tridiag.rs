use crate::error::{Error, Result};

/// Solves a tridiagonal system by the Thomas algorithm.
///
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::ShapeMismatch("tridiagonal bands differ in length".into()));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::SingularSystem { row: 0 });
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::SingularSystem { row: i });
        }
        c[i] = upper[i] / beta;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tridiagonal solve".into()));
    }
    Ok(d)
}
