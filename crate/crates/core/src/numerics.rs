//! Dense complex linear algebra kernels.
//!
//! Problem sizes stay below a few hundred rows, so everything is dense and
//! row-major. Hermitian positive definite systems go through a Cholesky
//! factorization; explicit inverses are never formed outside tests.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex;
#[allow(unused_imports)]
use num_traits::{Float, Zero};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Relative asymmetry tolerated when wrapping a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Gram matrices with a larger 2-norm condition number are rejected.
pub const SINGULAR_CONDITION: f64 = 1e12;
/// Default power-iteration tolerance on the Rayleigh quotient change.
pub const POWER_TOL: f64 = 1e-8;
/// Default power-iteration budget.
pub const POWER_MAX_ITER: usize = 1000;

#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, " {:+.4e}{:+.4e}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Wraps row-major data. Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "CMatrix::from_vec length");
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "CMatrix::from_real length");
        Self {
            rows,
            cols,
            data: data.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    pub fn diag_real(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [C64] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_c(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    /// Matrix product, panicking on inner-dimension mismatch.
    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul inner dimension {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        let n = rhs.cols;
        for i in 0..self.rows {
            let orow = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rrow = &rhs.data[k * n..(k + 1) * n];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * rhs^H` without forming the adjoint.
    pub fn mul_adjoint(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.cols, "mul_adjoint inner dimension");
        let mut out = CMatrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..rhs.rows {
                let b = rhs.row(j);
                let mut s = C64::zero();
                for (x, y) in a.iter().zip(b) {
                    s += x * y.conj();
                }
                out.data[i * rhs.rows + j] = s;
            }
        }
        out
    }

    /// `self^H * rhs` without forming the adjoint.
    pub fn adjoint_mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, rhs.rows, "adjoint_mul inner dimension");
        let mut out = CMatrix::zeros(self.cols, rhs.cols);
        let n = rhs.cols;
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = rhs.row(k);
            for (i, a) in arow.iter().enumerate() {
                let a = a.conj();
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let orow = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = C64::zero();
            for (a, b) in self.row(i).iter().zip(x) {
                s += a * b;
            }
            *yi = s;
        }
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &CMatrix) -> CMatrix {
        let (p, q) = rhs.shape();
        CMatrix::from_fn(self.rows * p, self.cols * q, |i, j| {
            self[(i / p, j / q)] * rhs[(i % p, j % q)]
        })
    }

    pub fn trace(&self) -> C64 {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// `Re Tr[self^H rhs]`, the real inner product on matrices.
    pub fn inner_re(&self, rhs: &CMatrix) -> f64 {
        assert_eq!(self.shape(), rhs.shape());
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn max_abs_diff(&self, rhs: &CMatrix) -> f64 {
        assert_eq!(self.shape(), rhs.shape());
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Copy of the `rows × cols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Relative Hermitian defect `‖A − A^H‖_F / ‖A‖_F`.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut num = 0.0;
        for i in 0..n {
            for j in 0..n {
                num += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        let den = self.frobenius_norm_sq();
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "add_assign shape");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "sub_assign shape");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.map(|z| -z)
    }
}

/// Lower-triangular Cholesky factor `A = L L^H`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: CMatrix,
}

impl Cholesky {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "cholesky",
                expected: (a.rows(), a.rows()),
                found: a.shape(),
            });
        }
        let n = a.rows();
        let mut l = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l[(j, j)] = C64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &CMatrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    fn solve_in_place(&self, x: &mut [C64]) {
        let n = self.dim();
        let l = &self.l;
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= l[(i, k)] * x[k];
            }
            x[i] = s / l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= l[(k, i)].conj() * x[k];
            }
            x[i] = s / l[(i, i)].re;
        }
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(b.rows(), self.dim(), "cholesky solve rows");
        let n = self.dim();
        let mut out = b.clone();
        let mut col = vec![C64::zero(); n];
        for j in 0..b.cols() {
            for i in 0..n {
                col[i] = b[(i, j)];
            }
            self.solve_in_place(&mut col);
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    pub fn solve_vec(&self, b: &[C64], out: &mut [C64]) {
        out.copy_from_slice(b);
        self.solve_in_place(out);
    }

    /// `Tr[A^{-1}] = ‖L^{-1}‖_F²`.
    pub fn trace_of_inverse(&self) -> f64 {
        let n = self.dim();
        let l = &self.l;
        let mut total = 0.0;
        let mut col = vec![C64::zero(); n];
        for j in 0..n {
            for c in col.iter_mut() {
                *c = C64::zero();
            }
            col[j] = C64::new(1.0 / l[(j, j)].re, 0.0);
            total += col[j].norm_sqr();
            for i in j + 1..n {
                let mut s = C64::zero();
                for k in j..i {
                    s -= l[(i, k)] * col[k];
                }
                col[i] = s / l[(i, i)].re;
                total += col[i].norm_sqr();
            }
        }
        total
    }

    pub fn inverse(&self) -> CMatrix {
        self.solve(&CMatrix::identity(self.dim()))
    }
}

/// Result of a power iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn start_vector(n: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n)
        .map(|i| {
            let t = (i + 1) as f64;
            C64::new(1.0 + 0.05 * t.sin(), 0.05 * (0.7 * t).cos())
        })
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in v.iter_mut() {
        *z /= norm;
    }
    v
}

/// Dominant eigenvalue of a Hermitian PSD operator given as a mat-vec.
pub fn power_iteration(
    n: usize,
    mut apply: impl FnMut(&[C64], &mut [C64]),
    tol: f64,
    max_iter: usize,
) -> EigenEstimate {
    if n == 0 {
        return EigenEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut v = start_vector(n);
    let mut w = vec![C64::zero(); n];
    let mut rho_prev = f64::NAN;
    let mut rho = 0.0;
    for it in 1..=max_iter {
        apply(&v, &mut w);
        rho = v.iter().zip(&w).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return EigenEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        if (rho - rho_prev).abs() <= tol * rho.abs() {
            return EigenEstimate {
                value: rho,
                iterations: it,
                converged: true,
            };
        }
        rho_prev = rho;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    EigenEstimate {
        value: rho,
        iterations: max_iter,
        converged: false,
    }
}

/// Dense Hermitian matrix, checked at construction and stored exactly Hermitian.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(a: CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                context: "hermitian matrix",
                expected: (a.rows(), a.rows()),
                found: a.shape(),
            });
        }
        let defect = a.hermitian_defect();
        if !(defect < HERMITIAN_TOL) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self::symmetrized(a))
    }

    fn symmetrized(mut a: CMatrix) -> Self {
        let n = a.rows();
        for i in 0..n {
            a[(i, i)].im = 0.0;
            for j in i + 1..n {
                let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
                a[(i, j)] = avg;
                a[(j, i)] = avg.conj();
            }
        }
        Self(a)
    }

    /// `S S^H`.
    pub fn gram(s: &CMatrix) -> Self {
        Self::symmetrized(s.mul_adjoint(s))
    }

    /// `S^H A S` for Hermitian `A`.
    pub fn congruence(a: &HermitianMatrix, s: &CMatrix) -> Self {
        Self::symmetrized(s.adjoint_mul(&a.0.matmul(s)))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn add_diagonal(&self, s: f64) -> Self {
        let mut a = self.0.clone();
        for i in 0..a.rows() {
            a[(i, i)].re += s;
        }
        Self(a)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::new(&self.0)
    }

    pub fn largest_eigenvalue(&self, tol: f64, max_iter: usize) -> EigenEstimate {
        power_iteration(self.dim(), |x, y| self.0.matvec(x, y), tol, max_iter)
    }

    /// 2-norm condition number estimate from two power iterations.
    pub fn condition_estimate(&self) -> Result<f64> {
        let chol = self.cholesky()?;
        Ok(condition_from(self, &chol))
    }
}

fn condition_from(a: &HermitianMatrix, chol: &Cholesky) -> f64 {
    let hi = a.largest_eigenvalue(1e-6, 300).value;
    let inv = power_iteration(a.dim(), |x, y| chol.solve_vec(x, y), 1e-6, 300).value;
    hi * inv
}

fn factor_checked(a: &HermitianMatrix) -> Result<Cholesky> {
    let chol = a.cholesky().map_err(|_| Error::SingularGram {
        condition: f64::INFINITY,
    })?;
    let condition = condition_from(a, &chol);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(Error::SingularGram { condition });
    }
    Ok(chol)
}

/// Dominant eigenvalue of a PSD Hermitian matrix by power iteration.
pub fn largest_eigenvalue(a: &HermitianMatrix, tol: f64, max_iter: usize) -> EigenEstimate {
    a.largest_eigenvalue(tol, max_iter)
}

/// `Tr[A^{-1}]`, rejecting matrices whose condition exceeds [`SINGULAR_CONDITION`].
pub fn trace_of_inverse(a: &HermitianMatrix) -> Result<f64> {
    Ok(factor_checked(a)?.trace_of_inverse())
}

/// Solves `A X = B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &HermitianMatrix, b: &CMatrix) -> Result<CMatrix> {
    if b.rows() != a.dim() {
        return Err(Error::DimensionMismatch {
            context: "solve_hpd",
            expected: (a.dim(), b.cols()),
            found: b.shape(),
        });
    }
    let chol = a.cholesky().map_err(|_| Error::SingularGram {
        condition: f64::INFINITY,
    })?;
    Ok(chol.solve(b))
}

/// Like [`solve_hpd`] but also applies the condition-number guard.
pub fn solve_hpd_checked(a: &HermitianMatrix, b: &CMatrix) -> Result<CMatrix> {
    Ok(factor_checked(a)?.solve(b))
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues and the row-major matrix whose columns are eigenvectors.
pub fn symmetric_eigen(n: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = m[p * n + r];
                if apr.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let arr = m[r * n + r];
                let theta = (arr - app) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkr = m[k * n + r];
                    m[k * n + p] = c * mkp - s * mkr;
                    m[k * n + r] = s * mkp + c * mkr;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mrk = m[r * n + k];
                    m[p * n + k] = c * mpk - s * mrk;
                    m[r * n + k] = s * mpk + c * mrk;
                }
                for k in 0..n {
                    let qkp = q[k * n + p];
                    let qkr = q[k * n + r];
                    q[k * n + p] = c * qkp - s * qkr;
                    q[k * n + r] = s * qkp + c * qkr;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[i * n + i]).collect();
    (values, q)
}

/// Symmetric square root `Q diag(√λ) Q^T` of a real symmetric PSD matrix.
pub fn symmetric_sqrt(n: usize, a: &[f64]) -> Vec<f64> {
    let (vals, q) = symmetric_eigen(n, a);
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        let s = vals[k].max(0.0).sqrt();
        for i in 0..n {
            let qik = q[i * n + k] * s;
            for j in 0..n {
                out[i * n + j] += qik * q[j * n + k];
            }
        }
    }
    out
}
