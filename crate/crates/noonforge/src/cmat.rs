//! Small dense complex matrices.
//!
//! Row-major storage, sized for the problems in this crate: 2x2 and 3x3
//! junctions, the 3x3 scattering matrix, and Fock-sector unitaries of a few
//! tens of rows. Not a general linear-algebra library.

use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::float::{Real, C};

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    /// Builds a matrix by evaluating `f(row, col)` for each entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major view of the entries.
    pub fn entries(&self) -> &[C<T>] {
        &self.data
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                for c in 0..rhs.cols {
                    let t = a * rhs[(k, c)];
                    out[(r, c)] += t;
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    /// Max-norm of `U†U − I`; zero for exactly unitary matrices.
    pub fn unitarity_residual(&self) -> T {
        assert!(self.is_square(), "unitarity is defined for square matrices");
        let gram = self.adjoint().mul(self);
        let mut worst = T::zero();
        for r in 0..gram.rows {
            for c in 0..gram.cols {
                let expect = if r == c { T::one() } else { T::zero() };
                let d = (gram[(r, c)] - Complex::new(expect, T::zero())).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Max-norm of the entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut worst = T::zero();
        for (a, b) in self.data.iter().zip(&other.data) {
            let d = (a - b).norm();
            if d > worst {
                worst = d;
            }
        }
        worst
    }
}

impl<T> Index<(usize, usize)> for CMat<T> {
    type Output = C<T>;

    fn index(&self, (r, c): (usize, usize)) -> &C<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for CMat<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}
