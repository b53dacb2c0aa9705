//! Small dense matrices: Kronecker products, column-stacking vectorization and the
//! `vec(ABC) = (Cᵀ ⊗ A) vec(B)` identity that separates control points from
//! time-dependent basis terms.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major entries.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[T]) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must equal rows * cols");
        Self {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn column(v: &[T]) -> Self {
        Self::from_row_slice(v.len(), 1, v)
    }

    pub fn row_vector(v: &[T]) -> Self {
        Self::from_row_slice(1, v.len(), v)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
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

    /// Row-major entries.
    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * alpha).collect(),
        }
    }

    /// `self * other`, panicking on non-conformable shapes.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "non-conformable product");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                for (o, &b) in out.row_mut(r).iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "non-conformable matrix-vector product");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ v` without forming the transpose.
    pub fn tr_matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "non-conformable transposed product");
        let mut out = vec![T::zero(); self.cols];
        for (r, &vr) in v.iter().enumerate() {
            if vr == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += a * vr;
            }
        }
        out
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for r in 0..block.rows {
            let dst = &mut self.data[(r0 + r) * self.cols + c0..(r0 + r) * self.cols + c0 + block.cols];
            dst.copy_from_slice(block.row(r));
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
    /// when a pivot is not strictly positive.
    pub fn cholesky(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "cholesky needs a square matrix");
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(l)
    }

    /// Solves `self · x = rhs` by Gaussian elimination with partial pivoting; `None`
    /// when the matrix is numerically singular.
    pub fn solve(&self, rhs: &[T]) -> Option<Vec<T>> {
        assert_eq!(self.rows, self.cols, "solve needs a square matrix");
        assert_eq!(self.rows, rhs.len());
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.to_vec();
        let scale = a.max_abs().max(T::min_positive_value());
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().partial_cmp(&a[(j, k)].abs()).unwrap())
                .unwrap();
            if a[(piv, k)].abs() <= scale * T::epsilon() * T::from_count(n) {
                return None;
            }
            if piv != k {
                for c in 0..n {
                    let tmp = a[(k, c)];
                    a[(k, c)] = a[(piv, c)];
                    a[(piv, c)] = tmp;
                }
                b.swap(k, piv);
            }
            for i in k + 1..n {
                let f = a[(i, k)] / a[(k, k)];
                if f == T::zero() {
                    continue;
                }
                for c in k..n {
                    let akc = a[(k, c)];
                    a[(i, c)] -= f * akc;
                }
                let bk = b[k];
                b[i] -= f * bk;
            }
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in i + 1..n {
                s -= a[(i, c)] * x[c];
            }
            x[i] = s / a[(i, i)];
        }
        Some(x)
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl<T: Scalar> Add for &Mat<T> {
    type Output = Mat<T>;

    fn add(self, rhs: Self) -> Mat<T> {
        assert_eq!(self.shape(), rhs.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Scalar> Sub for &Mat<T> {
    type Output = Mat<T>;

    fn sub(self, rhs: Self) -> Mat<T> {
        assert_eq!(self.shape(), rhs.shape());
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Scalar> Mul for &Mat<T> {
    type Output = Mat<T>;

    fn mul(self, rhs: Self) -> Mat<T> {
        self.matmul(rhs)
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[r * self.cols..(r + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

/// Kronecker product `a ⊗ b`, of shape `(ra·rb) × (ca·cb)`.
pub fn kron<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Mat<T> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = Mat::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == T::zero() {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Column-stacking vectorization: the columns of `a`, top to bottom, concatenated.
pub fn vec<T: Scalar>(a: &Mat<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(a.rows() * a.cols());
    for c in 0..a.cols() {
        for r in 0..a.rows() {
            out.push(a[(r, c)]);
        }
    }
    out
}

/// Inverse of [`vec`]: reshapes a column-stacked vector into a `rows × cols` matrix.
pub fn unvec<T: Scalar>(v: &[T], rows: usize, cols: usize) -> Mat<T> {
    assert_eq!(v.len(), rows * cols);
    Mat::from_fn(rows, cols, |r, c| v[c * rows + r])
}
