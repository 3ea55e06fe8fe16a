//! Small dense complex matrices and a Hermitian positive-definite solver.
//!
//! The matrices in this crate are tiny (a handful of control points by a
//! handful of loudspeakers), so a row-major `Vec` is all that is needed.

use std::ops::{Index, IndexMut};

use num_traits::{One, Zero};

use crate::scalar::{Cx, Real};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Cx<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Cx::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Cx::one();
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Cx<T>>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[Cx<T>] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Cx<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Cx<T>> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cx<T>> {
        self.data.iter()
    }

    pub fn map(&self, mut f: impl FnMut(Cx<T>) -> Cx<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    /// Matrix product, or `None` when inner dimensions differ.
    pub fn matmul(&self, rhs: &Self) -> Option<Self> {
        if self.cols != rhs.rows {
            return None;
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a.is_zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] = out[(r, c)] + a * rhs[(k, c)];
                }
            }
        }
        Some(out)
    }

    /// Entrywise difference, or `None` on shape mismatch.
    pub fn sub(&self, rhs: &Self) -> Option<Self> {
        (self.shape() == rhs.shape()).then(|| Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        })
    }

    /// Entrywise sum, or `None` on shape mismatch.
    pub fn add(&self, rhs: &Self) -> Option<Self> {
        (self.shape() == rhs.shape()).then(|| Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, alpha: Cx<T>) -> Self {
        self.map(|z| z * alpha)
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius(&self) -> T {
        self.frobenius_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Keeps the listed rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |r, c| self[(rows[r], c)])
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Cx<T>;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Cx<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Cx<T> {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Cholesky factor `A = L Lᴴ` of a Hermitian positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    lower: CMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factors `a`. Returns `None` when a pivot falls below a relative
    /// threshold, i.e. the matrix is singular to working precision.
    ///
    /// Only the lower triangle of `a` is read.
    pub fn factor(a: &CMatrix<T>) -> Option<Self> {
        let n = a.rows();
        if a.cols() != n {
            return None;
        }
        let max_diag = (0..n).map(|i| a[(i, i)].re.abs()).fold(T::zero(), T::max);
        if !(max_diag > T::zero()) || !max_diag.is_finite() {
            return None;
        }
        let tol = max_diag * T::epsilon() * T::lit(64.0) * T::from_usize(n).unwrap_or_else(T::one);

        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d = d - l[(j, k)].norm_sqr();
            }
            if !(d > tol) {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = Cx::new(djj, T::zero());
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(Self { lower: l })
    }

    pub fn lower(&self) -> &CMatrix<T> {
        &self.lower
    }

    /// Solves `A X = B` for every column of `b`, reusing the factor.
    pub fn solve(&self, b: &CMatrix<T>) -> CMatrix<T> {
        let n = self.lower.rows();
        assert_eq!(b.rows(), n, "right-hand side row count");
        let l = &self.lower;
        let mut x = b.clone();
        for c in 0..b.cols() {
            // forward: L y = b
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s = s - l[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
            // backward: Lᴴ x = y
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in (i + 1)..n {
                    s = s - l[(k, i)].conj() * x[(k, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    fn sample() -> CMatrix<f64> {
        CMatrix::from_row_major(
            2,
            3,
            vec![cx(1.0, 2.0), cx(0.0, -1.0), cx(3.0, 0.5), cx(-2.0, 0.0), cx(1.0, 1.0), cx(0.25, -0.75)],
        )
    }

    #[test]
    fn adjoint_twice_is_identity() {
        let a = sample();
        assert_eq!(a.adjoint().adjoint(), a);
        assert_eq!(a.adjoint().shape(), (3, 2));
        assert_eq!(a.adjoint()[(2, 1)], cx(0.25, 0.75));
    }

    #[test]
    fn matmul_rejects_bad_shapes() {
        let a = sample();
        assert!(a.matmul(&a).is_none());
        let g = a.matmul(&a.adjoint()).unwrap();
        assert_eq!(g.shape(), (2, 2));
        assert!((g[(0, 0)].re - a.row(0).iter().map(|z| z.norm_sqr()).sum::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn cholesky_solves_gram_system() {
        let a = sample();
        let mut g = a.matmul(&a.adjoint()).unwrap();
        for i in 0..2 {
            g[(i, i)] += cx(0.1, 0.0);
        }
        let chol = Cholesky::factor(&g).unwrap();
        let rhs = CMatrix::from_row_major(2, 2, vec![cx(1.0, 0.0), cx(0.0, 1.0), cx(2.0, -1.0), cx(0.5, 0.5)]);
        let x = chol.solve(&rhs);
        let back = g.matmul(&x).unwrap();
        assert!(back.sub(&rhs).unwrap().frobenius() < 1e-12);
        let llh = chol.lower().matmul(&chol.lower().adjoint()).unwrap();
        assert!(llh.sub(&g).unwrap().frobenius() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_rank_deficient() {
        // 3x3 Gram matrix of a rank-2 factor
        let a = sample();
        let g = a.adjoint().matmul(&a).unwrap();
        assert!(Cholesky::factor(&g).is_none());
        assert!(Cholesky::<f64>::factor(&CMatrix::zeros(2, 2)).is_none());
    }
}
