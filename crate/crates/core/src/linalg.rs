//! Dense Cholesky factorization with triangular solves.

use ndarray::{Array2, ArrayViewMut1};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower-triangular factor `L` with `A = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Array2<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(a: &Array2<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "Cholesky needs a square matrix, got {:?}",
                a.dim()
            )));
        }
        let mut l = Array2::<T>::zeros((n, n));
        for j in 0..n {
            let mut diag = a[[j, j]];
            for p in 0..j {
                diag -= l[[j, p]] * l[[j, p]];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    pivot: j,
                    value: diag.as_f64(),
                });
            }
            let ljj = diag.sqrt();
            l[[j, j]] = ljj;
            for i in j + 1..n {
                let mut s = a[[i, j]];
                for p in 0..j {
                    s -= l[[i, p]] * l[[j, p]];
                }
                l[[i, j]] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> &Array2<T> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `L·Lᵀ·x = b` for one vector in place.
    pub fn solve_vec(&self, mut b: ArrayViewMut1<'_, T>) {
        let n = self.dim();
        let l = &self.l;
        for i in 0..n {
            let mut s = b[i];
            for p in 0..i {
                s -= l[[i, p]] * b[p];
            }
            b[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for p in i + 1..n {
                s -= l[[p, i]] * b[p];
            }
            b[i] = s / l[[i, i]];
        }
    }

    /// Solves `L·Lᵀ·X = B` column by column in place.
    pub fn solve_in_place(&self, b: &mut Array2<T>) {
        for col in b.columns_mut() {
            self.solve_vec(col);
        }
    }

    pub fn solve(&self, b: &Array2<T>) -> Array2<T> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }
}
