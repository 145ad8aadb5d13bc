//! Thin dense linear-algebra layer over `faer`.
//!
//! Everything here is internal plumbing: eigendecompositions, singular
//! values, Kronecker products, and the matrix exponential of skew-Hermitian
//! inputs (the only exponentials the crate needs; both `D(α)` and the
//! magnetic translations have skew-Hermitian exponents, so the
//! eigendecomposition route is exact to roundoff).

use faer::prelude::Solve;
use faer::{c64, Col, Mat, Scale, Side};

use crate::error::{Error, Result};

pub(crate) const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub(crate) const I: c64 = c64 { re: 0.0, im: 1.0 };

pub(crate) fn scale(m: &Mat<c64>, s: c64) -> Mat<c64> {
    m * Scale(s)
}

pub(crate) fn kron(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    let mut out = Mat::zeros(ra * rb, ca * cb);
    for ia in 0..ra {
        for ja in 0..ca {
            let f = a[(ia, ja)];
            if f == ZERO {
                continue;
            }
            for ib in 0..rb {
                for jb in 0..cb {
                    out[(ia * rb + ib, ja * cb + jb)] = f * b[(ib, jb)];
                }
            }
        }
    }
    out
}

pub(crate) fn commutator(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    a * b - b * a
}

pub(crate) fn dagger(a: &Mat<c64>) -> Mat<c64> {
    a.adjoint().to_owned()
}

pub(crate) fn frobenius(a: &Mat<c64>) -> f64 {
    a.norm_l2()
}

/// Relative deviation from Hermiticity, measured entrywise.
pub(crate) fn hermiticity_residual(a: &Mat<c64>) -> f64 {
    let diff = a - a.adjoint();
    let scale = a.norm_max().max(1e-300);
    diff.norm_max() / scale
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending,
/// eigenvector k in column k.
pub(crate) fn hermitian_eigen(h: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "hermitian_eigen needs a square matrix, got {}x{}",
            n,
            h.ncols()
        )));
    }
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    let raw = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw[i].re.total_cmp(&raw[j].re));
    let values: Vec<f64> = order.iter().map(|&i| raw[i].re).collect();
    let mut vectors = Mat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.col_mut(dst).copy_from(u.col(src));
    }
    Ok((values, vectors))
}

/// Full eigendecomposition of a general complex matrix (right eigenvectors).
pub(crate) fn general_eigen(m: &Mat<c64>) -> Result<(Vec<c64>, Mat<c64>)> {
    let ev = m
        .eigen()
        .map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    let values: Vec<c64> = ev.S().column_vector().iter().copied().collect();
    Ok((values, ev.U().to_owned()))
}

/// Singular values, descending.
pub(crate) fn singular_values(m: &Mat<c64>) -> Result<Vec<f64>> {
    let svd = m.svd().map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    let mut s: Vec<f64> = svd.S().column_vector().iter().map(|v| v.re).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Operator 2-norm (largest singular value).
pub(crate) fn operator_norm(m: &Mat<c64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    singular_values(m).map(|s| s[0]).unwrap_or_else(|_| m.norm_l2())
}

/// Solve A X = B by partial-pivot LU.
pub(crate) fn lu_solve(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    a.partial_piv_lu().solve(b)
}

pub(crate) fn lu_solve_col(a: &Mat<c64>, b: &Col<c64>) -> Col<c64> {
    a.partial_piv_lu().solve(b)
}

/// exp(K) for skew-Hermitian K, via the Hermitian eigendecomposition of
/// M = -iK: exp(K) = U exp(iΛ) U†.  Exact unitarity up to roundoff.
pub(crate) fn expm_skew_hermitian(k: &Mat<c64>) -> Result<Mat<c64>> {
    let skew = {
        let diff = k + k.adjoint();
        diff.norm_max() / k.norm_max().max(1e-300)
    };
    if k.norm_max() > 0.0 && skew > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "expm_skew_hermitian: input deviates from skew-Hermitian by {skew:.3e}"
        )));
    }
    let m = scale(k, -I); // Hermitian
    let (vals, u) = hermitian_eigen(&m)?;
    let n = k.nrows();
    let mut phases = Mat::zeros(n, n);
    for (j, &v) in vals.iter().enumerate() {
        phases[(j, j)] = c64::new(0.0, v).exp();
    }
    Ok(&u * &phases * u.adjoint())
}

/// Project a matrix onto a subset of rows/columns (returns the submatrix).
pub(crate) fn select_submatrix(m: &Mat<c64>, idx: &[usize]) -> Mat<c64> {
    let k = idx.len();
    Mat::from_fn(k, k, |i, j| m[(idx[i], idx[j])])
}
