//! Matrix norms: elementwise max, spectral, Frobenius, induced l-infinity,
//! elementwise l1, and the relative Frobenius norm used to compare
//! covariance estimates against a reference.

use ndarray::Array2;

use super::{sym_eigen, sym_eigen_full, SymMatrix};
use crate::error::LinalgError;

/// `max_ij |A_ij|`.
pub fn norm_max(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Frobenius norm `(sum A_ij^2)^{1/2}`.
pub fn norm_fro(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Induced l-infinity norm: maximum absolute row sum.
pub fn norm_inf_induced(a: &Array2<f64>) -> f64 {
    let mut best = 0.0f64;
    for row in a.rows() {
        let s: f64 = row.iter().map(|v| v.abs()).sum();
        best = best.max(s);
    }
    best
}

/// Elementwise l1 norm `sum_ij |A_ij|`.
pub fn norm_l11(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// Spectral norm `lambda_max^{1/2}(A'A)`.
///
/// Computed through the symmetric eigensolver on `A'A`, which avoids a
/// general SVD. Rejects non-finite input.
pub fn norm_spectral(a: &Array2<f64>) -> Result<f64, LinalgError> {
    let b = SymMatrix::from_array(a.t().dot(a))?;
    let top = sym_eigen(&b, 1)?.values[0];
    Ok(top.max(0.0).sqrt())
}

/// Relative Frobenius norm `p^{-1/2} ||S A S||_F` with `S = Sigma^{-1/2}`,
/// normalized so that the norm of `Sigma` itself is 1.
///
/// `Sigma` must be positive definite: its smallest eigenvalue must exceed
/// `1e-12` times its largest.
pub fn norm_relative_fro(a: &SymMatrix, sigma: &SymMatrix) -> Result<f64, LinalgError> {
    let p = sigma.dim();
    if a.dim() != p {
        return Err(LinalgError::DimensionMismatch {
            expected: p,
            actual: a.dim(),
        });
    }
    let eig = sym_eigen_full(sigma)?;
    let lam_max = eig.values[0];
    let lam_min = eig.values[p - 1];
    if !(lam_max > 0.0) || lam_min <= 1e-12 * lam_max {
        return Err(LinalgError::Singular {
            ratio: if lam_max > 0.0 { lam_min / lam_max } else { 0.0 },
        });
    }
    let inv_sqrt = SymMatrix::from_diag(
        &eig.values.iter().map(|l| 1.0 / l.sqrt()).collect::<Vec<_>>(),
    );
    let s = eig
        .vectors
        .dot(inv_sqrt.as_array())
        .dot(&eig.vectors.t());
    let sandwiched = s.dot(a.as_array()).dot(&s);
    Ok(norm_fro(&sandwiched) / (p as f64).sqrt())
}
