//! Dense row-major helpers: just enough for the Kalman filter and GP smoothing.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square matrix in row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    /// Lower-triangular Cholesky factor `L` with `L Lᵀ = self`.
    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        let n = self.n;
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::Numerical(format!(
                    "matrix not positive definite (pivot {j} = {d})"
                )));
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Cholesky { n, l })
    }
}

#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub(crate) fn matmul<T: Scalar, const N: usize, const K: usize, const M: usize>(
    a: &[[T; K]; N],
    b: &[[T; M]; K],
) -> [[T; M]; N] {
    let mut out = [[T::zero(); M]; N];
    for i in 0..N {
        for k in 0..K {
            let aik = a[i][k];
            if aik == T::zero() {
                continue;
            }
            for j in 0..M {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub(crate) fn transpose<T: Scalar, const N: usize, const M: usize>(a: &[[T; M]; N]) -> [[T; N]; M] {
    let mut out = [[T::zero(); N]; M];
    for i in 0..N {
        for j in 0..M {
            out[j][i] = a[i][j];
        }
    }
    out
}

pub(crate) fn symmetrize<T: Scalar, const N: usize>(a: &mut [[T; N]; N]) {
    let half = T::lit(0.5);
    for i in 0..N {
        for j in (i + 1)..N {
            let v = half * (a[i][j] + a[j][i]);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
}
