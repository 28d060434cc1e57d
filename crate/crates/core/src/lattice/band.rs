//! Banded Cholesky factorization of the Dirichlet Laplacian.
//!
//! Unknowns are numbered row-major, so every edge couples unknowns at most
//! one grid row apart and the factor fits in a band of width ≈ `nx`.

use crate::error::{Error, Result};

/// Lower-triangular band factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    dim: usize,
    bw: usize,
    // row i holds L(i, i - bw ..= i), left to right
    data: Vec<f64>,
}

impl BandCholesky {
    /// Factor a symmetric positive-definite band matrix given by `entry(i, j)`
    /// for `i - bw <= j <= i`.
    pub fn factor(dim: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = bw + 1;
        let mut data = vec![0.0; dim * w];
        for i in 0..dim {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut s = entry(i, j);
                let k0 = lo.max(j.saturating_sub(bw));
                let ri = i * w + bw - i;
                let rj = j * w + bw - j;
                for k in k0..j {
                    s -= data[ri + k] * data[rj + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Singular { pivot: i });
                    }
                    data[ri + i] = s.sqrt();
                } else {
                    data[ri + j] = s / data[rj + j];
                }
            }
        }
        Ok(Self { dim, bw, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.bw + 1) + self.bw + j - i]
    }

    /// Solve `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        for i in 0..self.dim {
            let lo = i.saturating_sub(self.bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.at(i, k) * b[k];
            }
            b[i] = s / self.at(i, i);
        }
    }

    /// Solve `Lᵀ x = y` in place.
    pub fn backward(&self, y: &mut [f64]) {
        for i in (0..self.dim).rev() {
            let x = y[i] / self.at(i, i);
            y[i] = x;
            let lo = i.saturating_sub(self.bw);
            for k in lo..i {
                y[k] -= self.at(i, k) * x;
            }
        }
    }

    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_system() {
        // A = tridiag(-1, 2, -1), x = (1, 2, 3, 4)
        let n = 4;
        let a = |i: usize, j: usize| if i == j { 2.0 } else { -1.0 };
        let chol = BandCholesky::factor(n, 1, a).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0];
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = 2.0 * x[i];
            if i > 0 {
                b[i] -= x[i - 1];
            }
            if i + 1 < n {
                b[i] -= x[i + 1];
            }
        }
        chol.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let a = |i: usize, j: usize| if i == j { 1.0 } else { -2.0 };
        assert!(matches!(
            BandCholesky::factor(2, 1, a),
            Err(Error::Singular { .. })
        ));
    }
}
