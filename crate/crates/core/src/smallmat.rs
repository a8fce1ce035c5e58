//! Small dense matrices over real or complex scalars.
//!
//! Everything in this crate lives in dimension five or less, so the storage is
//! a plain row-major `Vec` and every algorithm is the textbook dense one.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("matrix is rank deficient (pivot {pivot:e} below {threshold:e})")]
    Degenerate { pivot: f64, threshold: f64 },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("expected {expected} entries, got {got}")]
    Length { expected: usize, got: usize },
}

/// Scalar field of a [`Matrix`]: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + PartialEq
    + fmt::Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    const IS_COMPLEX: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn modulus_sqr(self) -> f64;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn is_finite(self) -> bool;
    fn to_complex(self) -> Complex64;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn modulus_sqr(self) -> f64 {
        self * self
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn modulus_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Dense row-major matrix. Vectors are `n x 1` matrices.
#[derive(Clone, PartialEq)]
pub struct Matrix<T: Scalar = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RealMatrix = Matrix<f64>;
pub type ComplexMatrix = Matrix<Complex64>;

impl<T: Scalar> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl<T: Scalar> Matrix<T> {
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

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::Length {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from literal rows.
    ///
    /// Panics on ragged rows or non-finite entries; use [`Matrix::from_vec`]
    /// for fallible construction.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::from_vec(rows.len(), cols, data).expect("literal matrix must be finite")
    }

    pub fn column(v: &[T]) -> Self {
        Self::from_vec(v.len(), 1, v.to_vec()).expect("literal vector must be finite")
    }

    pub fn diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(T::from_real(s))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].conj();
            }
        }
        t
    }

    pub fn trace(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.rows.min(self.cols) {
            s += self[(i, i)];
        }
        s
    }

    pub fn to_complex(&self) -> ComplexMatrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.to_complex()).collect(),
        }
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<(), MatrixError> {
        if self.shape() != other.shape() {
            return Err(MatrixError::Shape {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, MatrixError> {
        self.check_same_shape(other, "add")?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, MatrixError> {
        self.check_same_shape(other, "sub")?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += s * other`, the axpy used by every stage update.
    pub fn axpy(&mut self, s: T, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|x| x.modulus_sqr()).sum::<f64>().sqrt()
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].modulus()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }

    /// Determinant by partial-pivot LU.
    pub fn det(&self) -> Result<T, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::NotSquare {
                op: "det",
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut lu = self.clone();
        let mut det = T::one();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[(i, k)].modulus().total_cmp(&lu[(j, k)].modulus()))
                .unwrap();
            if lu[(p, k)].modulus() == 0.0 {
                return Ok(T::zero());
            }
            if p != k {
                lu.swap_rows(p, k);
                det = -det;
            }
            let pivot = lu[(k, k)];
            det = det * pivot;
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                for j in k..n {
                    let v = lu[(k, j)];
                    lu[(i, j)] -= f * v;
                }
            }
        }
        Ok(det)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl<T: Scalar> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

// Operator forms panic on shape mismatch; the `try_*` / free functions
// return `MatrixError` instead.
impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: Self) -> Matrix<T> {
        self.try_add(rhs).unwrap()
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: Self) -> Matrix<T> {
        self.try_sub(rhs).unwrap()
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: Self) -> Matrix<T> {
        mat_mul(self, rhs).unwrap()
    }
}

impl<T: Scalar> Neg for &Matrix<T> {
    type Output = Matrix<T>;
    fn neg(self) -> Matrix<T> {
        self.map(|x| -x)
    }
}

pub fn mat_mul<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, MatrixError> {
    if a.cols != b.rows {
        return Err(MatrixError::Shape {
            op: "mat_mul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let mut c = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let crow = &mut c.data[i * b.cols..(i + 1) * b.cols];
            for (cij, &bkj) in crow.iter_mut().zip(brow) {
                *cij += aik * bkj;
            }
        }
    }
    Ok(c)
}

/// Product of a real and a complex matrix, promoting the real factor.
pub fn mat_mul_mixed(a: &RealMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, MatrixError> {
    mat_mul(&a.to_complex(), b)
}

/// `[u, v] = uv - vu`.
pub fn commutator<T: Scalar>(u: &Matrix<T>, v: &Matrix<T>) -> Result<Matrix<T>, MatrixError> {
    if !u.is_square() {
        return Err(MatrixError::NotSquare {
            op: "commutator",
            rows: u.rows,
            cols: u.cols,
        });
    }
    if u.shape() != v.shape() {
        return Err(MatrixError::Shape {
            op: "commutator",
            lhs: u.shape(),
            rhs: v.shape(),
        });
    }
    let uv = mat_mul(u, v)?;
    let vu = mat_mul(v, u)?;
    uv.try_sub(&vu)
}

/// Hat map from R^3 to so(3): `hat(v) w = v x w`.
pub fn hat(v: [f64; 3]) -> RealMatrix {
    let [v1, v2, v3] = v;
    Matrix {
        rows: 3,
        cols: 3,
        data: vec![0.0, -v3, v2, v3, 0.0, -v1, -v2, v1, 0.0],
    }
}

// Diagonal Padé [6/6] numerator coefficients c_k = (2m-k)! m! / ((2m)! k! (m-k)!).
const PADE_DEGREE: usize = 6;
const PADE_COEFFS: [f64; PADE_DEGREE + 1] = [
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];
const SCALED_NORM_LIMIT: f64 = 0.5;

/// Matrix exponential by scaling and squaring with a [6/6] Padé approximant.
///
/// The squaring count is chosen so the scaled 1-norm is at most 0.5, where the
/// Padé truncation error is below 1e-17.
pub fn expm<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>, MatrixError> {
    if !m.is_square() {
        return Err(MatrixError::NotSquare {
            op: "expm",
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    let norm = m.norm1();
    if norm == 0.0 {
        return Ok(Matrix::identity(n));
    }
    if !norm.is_finite() {
        return Err(first_non_finite(m));
    }
    let squarings = if norm > SCALED_NORM_LIMIT {
        (norm / SCALED_NORM_LIMIT).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let x = m.scale_real(0.5f64.powi(squarings));

    // Even and odd parts: p(x) = e + o, q(x) = p(-x) = e - o.
    let x2 = mat_mul(&x, &x)?;
    let x4 = mat_mul(&x2, &x2)?;
    let x6 = mat_mul(&x4, &x2)?;
    let ident = Matrix::identity(n);
    let mut even = ident.scale_real(PADE_COEFFS[0]);
    even.axpy(T::from_real(PADE_COEFFS[2]), &x2);
    even.axpy(T::from_real(PADE_COEFFS[4]), &x4);
    even.axpy(T::from_real(PADE_COEFFS[6]), &x6);
    let mut odd_inner = ident.scale_real(PADE_COEFFS[1]);
    odd_inner.axpy(T::from_real(PADE_COEFFS[3]), &x2);
    odd_inner.axpy(T::from_real(PADE_COEFFS[5]), &x4);
    let odd = mat_mul(&x, &odd_inner)?;

    let p = &even + &odd;
    let q = &even - &odd;
    let mut r = solve(&q, &p)?;
    for _ in 0..squarings {
        r = mat_mul(&r, &r)?;
    }
    Ok(r)
}

fn first_non_finite<T: Scalar>(m: &Matrix<T>) -> MatrixError {
    let k = m.data.iter().position(|x| !x.is_finite()).unwrap_or(0);
    MatrixError::NonFinite {
        row: k / m.cols.max(1),
        col: k % m.cols.max(1),
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, MatrixError> {
    if !a.is_square() {
        return Err(MatrixError::NotSquare {
            op: "solve",
            rows: a.rows,
            cols: a.cols,
        });
    }
    if a.rows != b.rows {
        return Err(MatrixError::Shape {
            op: "solve",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let n = a.rows;
    let m = b.cols;
    let mut lu = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| lu[(i, k)].modulus().total_cmp(&lu[(j, k)].modulus()))
            .unwrap();
        let pivot_mod = lu[(p, k)].modulus();
        if pivot_mod == 0.0 || !pivot_mod.is_finite() {
            return Err(MatrixError::Degenerate {
                pivot: pivot_mod,
                threshold: 0.0,
            });
        }
        lu.swap_rows(p, k);
        x.swap_rows(p, k);
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let f = lu[(i, k)] / pivot;
            if f == T::zero() {
                continue;
            }
            for j in k..n {
                let v = lu[(k, j)];
                lu[(i, j)] -= f * v;
            }
            for j in 0..m {
                let v = x[(k, j)];
                x[(i, j)] -= f * v;
            }
        }
    }
    for k in (0..n).rev() {
        let pivot = lu[(k, k)];
        for j in 0..m {
            let mut s = x[(k, j)];
            for l in k + 1..n {
                s -= lu[(k, l)] * x[(l, j)];
            }
            x[(k, j)] = s / pivot;
        }
    }
    Ok(x)
}

/// Spectral norm (largest singular value); Euclidean norm for vectors.
pub fn norm2<T: Scalar>(m: &Matrix<T>) -> f64 {
    if m.rows == 0 || m.cols == 0 {
        return 0.0;
    }
    if m.cols == 1 || m.rows == 1 {
        return m.norm_fro();
    }
    if T::IS_COMPLEX {
        // The real embedding [[Re, -Im], [Im, Re]] has the same singular
        // values, each repeated twice.
        let (r, c) = m.shape();
        let mut e = RealMatrix::zeros(2 * r, 2 * c);
        for i in 0..r {
            for j in 0..c {
                let z = m[(i, j)];
                e[(i, j)] = z.re();
                e[(i, j + c)] = -z.im();
                e[(i + r, j)] = z.im();
                e[(i + r, j + c)] = z.re();
            }
        }
        return singular_values(&e).into_iter().fold(0.0, f64::max);
    }
    let re = RealMatrix {
        rows: m.rows,
        cols: m.cols,
        data: m.data.iter().map(|x| x.re()).collect(),
    };
    singular_values(&re).into_iter().fold(0.0, f64::max)
}

/// Singular values by one-sided Jacobi (Hestenes) rotations on the columns.
pub fn singular_values(m: &RealMatrix) -> Vec<f64> {
    // Work on the orientation with at least as many rows as columns.
    let mut w = if m.rows >= m.cols {
        m.clone()
    } else {
        m.transpose()
    };
    let (rows, cols) = w.shape();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let (xp, xq) = (w[(i, p)], w[(i, q)]);
                    alpha += xp * xp;
                    beta += xq * xq;
                    gamma += xp * xq;
                }
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let (xp, xq) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * xp - s * xq;
                    w[(i, q)] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| w[(i, j)] * w[(i, j)]).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Orthonormalizes the columns of a square real matrix (Q of a QR
/// factorization with positive diagonal R).
///
/// Modified Gram-Schmidt with one re-orthogonalization pass.
pub fn gram_schmidt_orthonormalize(m: &RealMatrix) -> Result<RealMatrix, MatrixError> {
    if !m.is_square() {
        return Err(MatrixError::NotSquare {
            op: "gram_schmidt_orthonormalize",
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    let threshold = 1e-12 * norm2(m);
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| m[(i, j)]).collect()).collect();
    for j in 0..n {
        let original = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        for _pass in 0..2 {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let qk = &done[k];
                let v = &mut rest[0];
                let r: f64 = qk.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(qk) {
                    *vi -= r * qi;
                }
            }
        }
        let len = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if len < threshold || len <= 1e-12 * original || original == 0.0 {
            return Err(MatrixError::Degenerate {
                pivot: len,
                threshold,
            });
        }
        for x in cols[j].iter_mut() {
            *x /= len;
        }
    }
    let mut q = RealMatrix::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            q[(i, j)] = x;
        }
    }
    Ok(q)
}
