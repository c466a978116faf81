//! Dense symmetric matrices and the spectral/factorization kernels the
//! solvers are built from.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense symmetric `n × n` matrix with finite entries.
///
/// The stored form is exactly symmetric: constructors average the input with
/// its transpose after checking the asymmetry is at round-off level.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat<T: Real> {
    data: DMatrix<T>,
}

/// Eigendecomposition `M = Q diag(lambda) Qᵀ` with `lambda` sorted
/// descending.
#[derive(Debug, Clone)]
pub struct SpectralDecomp<T: Real> {
    pub q: DMatrix<T>,
    pub lambda: DVector<T>,
}

fn symmetrize<T: Real>(m: &mut DMatrix<T>) {
    let n = m.nrows();
    let half = T::lit(0.5);
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

impl<T: Real> SymMat<T> {
    /// Validates and symmetrizes a square matrix.
    pub fn new(mut m: DMatrix<T>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("empty matrix"));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite entry"));
        }
        let max_abs = m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        let tol = T::tol(1e-12) * (T::one() + max_abs);
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > tol {
                    return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        symmetrize(&mut m);
        Ok(Self { data: m })
    }

    /// Builds from `n * n` entries in row-major order.
    pub fn from_row_major(n: usize, entries: &[T]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
        }
        Self::new(DMatrix::from_row_slice(n, n, entries))
    }

    /// Wraps the result of internal arithmetic. Symmetrizes but skips the
    /// validation done by [`SymMat::new`].
    pub(crate) fn from_raw(mut m: DMatrix<T>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        symmetrize(&mut m);
        Self { data: m }
    }

    pub fn identity(n: usize) -> Self {
        Self { data: DMatrix::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: DMatrix::zeros(n, n) }
    }

    pub fn scaled_identity(n: usize, s: T) -> Self {
        Self { data: DMatrix::from_diagonal_element(n, n, s) }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        Self { data: DMatrix::from_diagonal(&DVector::from_column_slice(diag)) }
    }

    /// `n × n` matrix with a single scalar entry, convenient for `n = 1` cases.
    pub fn scalar(x: T) -> Self {
        Self::from_diagonal(&[x])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[(i, j)]
    }

    #[inline]
    pub fn as_matrix(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.data
    }

    pub fn to_row_major(&self) -> Vec<T> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.data[(i, j)]);
            }
        }
        out
    }

    pub fn diagonal(&self) -> Vec<T> {
        self.data.diagonal().iter().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn frob_norm(&self) -> T {
        self.data.norm()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    pub fn trace(&self) -> T {
        self.data.trace()
    }

    pub fn scale(&self, s: T) -> Self {
        Self { data: &self.data * s }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        let mut data = self.data.clone();
        data.zip_apply(&other.data, |a, b| *a += s * b);
        Self { data }
    }

    /// `b · self · b` for symmetric `b`.
    pub fn sandwich(&self, b: &Self) -> Self {
        Self::from_raw(&b.data * &self.data * &b.data)
    }

    /// `a · self · aᵀ` for a rectangular `a`.
    pub fn congruence(&self, a: &DMatrix<T>) -> Self {
        Self::from_raw(a * &self.data * a.transpose())
    }

    /// `aᵀ · self · a` for a rectangular `a`.
    pub fn transpose_congruence(&self, a: &DMatrix<T>) -> Self {
        Self::from_raw(a.transpose() * &self.data * a)
    }

    pub fn eig(&self) -> Result<SpectralDecomp<T>> {
        sym_eig(self)
    }

    pub fn min_eig(&self) -> Result<T> {
        Ok(self.eig()?.min())
    }

    pub fn max_eig(&self) -> Result<T> {
        Ok(self.eig()?.max())
    }

    /// True when the smallest eigenvalue is at least `-tol`.
    pub fn is_psd_within(&self, tol: T) -> bool {
        self.min_eig().map(|m| m >= -tol).unwrap_or(false)
    }

    /// True when a Cholesky factorization succeeds.
    pub fn is_pd(&self) -> bool {
        Cholesky::new(self.data.clone()).is_some()
    }
}

impl<T: Real> SpectralDecomp<T> {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn max(&self) -> T {
        self.lambda[0]
    }

    pub fn min(&self) -> T {
        self.lambda[self.lambda.len() - 1]
    }

    /// `Q · diag(f(λ)) · Qᵀ`.
    pub fn compose(&self, f: impl Fn(T) -> T) -> SymMat<T> {
        let mut scaled = self.q.clone();
        for (j, &l) in self.lambda.iter().enumerate() {
            let s = f(l);
            scaled.column_mut(j).scale_mut(s);
        }
        SymMat::from_raw(scaled * self.q.transpose())
    }

    /// `Q · diag(lambda) · Qᵀ`.
    pub fn reconstruct(&self) -> SymMat<T> {
        self.compose(|l| l)
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
///
/// Eigenvector signs are canonicalized so the first entry whose magnitude is
/// at least half the column's largest entry is positive.
pub fn sym_eig<T: Real>(m: &SymMat<T>) -> Result<SpectralDecomp<T>> {
    if !m.is_finite() {
        return Err(Error::invalid("non-finite entry"));
    }
    let n = m.dim();
    let (values, vectors) = T::eigh(&m.data);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut q = DMatrix::zeros(n, n);
    let mut lambda = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        lambda[dst] = values[src];
        let col = vectors.column(src);
        let peak = col.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        let half = peak * T::lit(0.5);
        let flip = col.iter().find(|x| x.abs() >= half).is_some_and(|x| *x < T::zero());
        let sign = if flip { -T::one() } else { T::one() };
        for i in 0..n {
            q[(i, dst)] = col[i] * sign;
        }
    }
    Ok(SpectralDecomp { q, lambda })
}

/// Principal square root of a positive semidefinite matrix.
///
/// Eigenvalues down to `-1e-10 ‖M‖_F` are treated as round-off and clamped
/// to zero; anything below `-1e-6 ‖M‖_F` is rejected.
pub fn sym_sqrt<T: Real>(m: &SymMat<T>) -> Result<SymMat<T>> {
    let eig = sym_eig(m)?;
    let scale = m.frob_norm();
    let min = eig.min();
    if min < -T::tol(1e-6) * scale {
        return Err(Error::NotPsd { min_eig: min.as_f64() });
    }
    Ok(eig.compose(|l| l.max(T::zero()).sqrt()))
}

/// `(M^{1/2}, M^{-1/2})` for positive definite `M`, from one eigendecomposition.
pub fn sqrt_and_inv_sqrt<T: Real>(m: &SymMat<T>) -> Result<(SymMat<T>, SymMat<T>)> {
    let eig = sym_eig(m)?;
    if eig.min() <= T::zero() {
        return Err(Error::NotPd);
    }
    Ok((eig.compose(|l| l.sqrt()), eig.compose(|l| T::one() / l.sqrt())))
}

fn cholesky<T: Real>(m: &SymMat<T>) -> Result<Cholesky<T, nalgebra::Dyn>> {
    if !m.is_finite() {
        return Err(Error::NotPd);
    }
    Cholesky::new(m.data.clone()).ok_or(Error::NotPd)
}

/// `log det M` for positive definite `M`, via Cholesky.
pub fn logdet_pd<T: Real>(m: &SymMat<T>) -> Result<T> {
    let chol = cholesky(m)?;
    let l = chol.l_dirty();
    let mut acc = T::zero();
    for i in 0..m.dim() {
        acc += l[(i, i)].ln();
    }
    Ok(acc * T::lit(2.0))
}

/// Inverse of a positive definite matrix, via Cholesky.
pub fn inv_pd<T: Real>(m: &SymMat<T>) -> Result<SymMat<T>> {
    let chol = cholesky(m)?;
    Ok(SymMat::from_raw(chol.inverse()))
}

/// Trace inner product `Σ_ij A_ij B_ij`.
pub fn frob_inner<T: Real>(a: &SymMat<T>, b: &SymMat<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(a.data.dot(&b.data))
}

impl<T: Real> Add for &SymMat<T> {
    type Output = SymMat<T>;
    fn add(self, rhs: Self) -> SymMat<T> {
        SymMat { data: &self.data + &rhs.data }
    }
}

impl<T: Real> Sub for &SymMat<T> {
    type Output = SymMat<T>;
    fn sub(self, rhs: Self) -> SymMat<T> {
        SymMat { data: &self.data - &rhs.data }
    }
}

impl<T: Real> Neg for &SymMat<T> {
    type Output = SymMat<T>;
    fn neg(self) -> SymMat<T> {
        SymMat { data: -&self.data }
    }
}

impl<T: Real> Mul<T> for &SymMat<T> {
    type Output = SymMat<T>;
    fn mul(self, rhs: T) -> SymMat<T> {
        self.scale(rhs)
    }
}
