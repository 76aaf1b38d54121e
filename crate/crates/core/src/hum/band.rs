use crate::error::{Error, Result};

/// Cholesky factor of a symmetric positive definite matrix with two off-diagonals.
#[derive(Debug, Clone)]
pub struct PentaCholesky {
    /// Row `i` holds `L[i][i-2], L[i][i-1], L[i][i]`.
    rows: Vec<[f64; 3]>,
}

impl PentaCholesky {
    /// `bands[i] = [A[i][i], A[i][i+1], A[i][i+2]]`.
    pub fn factor(bands: &[[f64; 3]]) -> Result<Self> {
        let n = bands.len();
        let mut rows = vec![[0.0; 3]; n];
        for i in 0..n {
            let l2 = if i >= 2 { bands[i - 2][2] / rows[i - 2][2] } else { 0.0 };
            let l1 = if i >= 1 {
                let mut v = bands[i - 1][1];
                if i >= 2 {
                    v -= l2 * rows[i - 1][1];
                }
                v / rows[i - 1][2]
            } else {
                0.0
            };
            let d = bands[i][0] - l1 * l1 - l2 * l2;
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularSystem { row: i });
            }
            rows[i] = [l2, l1, d.sqrt()];
        }
        Ok(Self { rows })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.rows.len();
        for i in 0..n {
            let mut v = b[i];
            if i >= 1 {
                v -= self.rows[i][1] * b[i - 1];
            }
            if i >= 2 {
                v -= self.rows[i][0] * b[i - 2];
            }
            b[i] = v / self.rows[i][2];
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v -= self.rows[i + 1][1] * b[i + 1];
            }
            if i + 2 < n {
                v -= self.rows[i + 2][0] * b[i + 2];
            }
            b[i] = v / self.rows[i][2];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_solves_pentadiagonal_system() {
        let n = 7;
        let bands: Vec<[f64; 3]> = (0..n).map(|i| [6.0 + i as f64 * 0.1, -2.0, 0.5]).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] += bands[i][0] * x[i];
            for k in 1..=2 {
                if i + k < n {
                    b[i] += bands[i][k] * x[i + k];
                    b[i + k] += bands[i][k] * x[i];
                }
            }
        }
        let f = PentaCholesky::factor(&bands).unwrap();
        f.solve_in_place(&mut b);
        for (g, e) in b.iter().zip(&x) {
            assert!((g - e).abs() < 1e-13);
        }
    }
}
