//! Internal dense linear-algebra helpers.
//!
//! The crate works with `nalgebra` types at its interfaces; the heavy
//! factorizations (thin SVD of tall real matrices, nonsymmetric
//! eigendecompositions) are delegated to `faer`, which is considerably faster
//! on the matrix sizes produced by long trajectories.

use faer::Mat;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD of a real matrix: `m = u * diag(s) * v^T` with `u`, `v` having
/// `min(nrows, ncols)` columns and `s` sorted in nonincreasing order.
pub(crate) fn thin_svd_real(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = to_faer(m)
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let p = m.nrows().min(m.ncols());
    let u = svd.U();
    let v = svd.V();
    let s = svd.S();
    let un = DMatrix::from_fn(m.nrows(), p, |i, j| u[(i, j)]);
    let vn = DMatrix::from_fn(m.ncols(), p, |i, j| v[(i, j)]);
    let sn = DVector::from_fn(p, |i, _| s[i]);
    Ok((un, sn, vn))
}

/// Eigenvalues of a real square matrix.
pub(crate) fn eigenvalues_real(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    to_faer(m)
        .eigenvalues()
        .map_err(|e| Error::Numerical(format!("eigenvalue iteration failed: {e:?}")))
}

/// Eigenvalues and right eigenvectors of a real square matrix.
pub(crate) fn eigen_real(m: &DMatrix<f64>) -> Result<(Vec<Complex64>, DMatrix<Complex64>)> {
    let evd = faer::linalg::solvers::Eigen::new_from_real(to_faer(m).as_ref())
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let n = m.nrows();
    let u = evd.U();
    let s = evd.S();
    let vals: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    Ok((vals, vecs))
}

/// Spectral radius of a real square matrix.
pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues_real(m)?
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max))
}

/// Singular values of a complex matrix (nonincreasing).
pub(crate) fn singular_values_complex(m: &DMatrix<Complex64>) -> DVector<f64> {
    m.clone().svd(false, false).singular_values
}

/// Number of singular values at or above `tol * s_max` (MATLAB-style default
/// when `tol` is `None`: `max(nrows, ncols) * eps * s_max`).
pub(crate) fn numerical_rank(s: &[f64], nrows: usize, ncols: usize, tol: Option<f64>) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return 0;
    }
    let cutoff = match tol {
        Some(t) => t * smax,
        None => nrows.max(ncols) as f64 * f64::EPSILON * smax,
    };
    s.iter().take_while(|&&x| x >= cutoff).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thin_svd_reconstructs() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (u, s, v) = thin_svd_real(&m).unwrap();
        let rec = &u * DMatrix::from_diagonal(&s) * v.transpose();
        assert!((&rec - &m).norm() < 1e-12);
        assert!(s[0] >= s[1]);
    }

    #[test]
    fn eigenvalues_of_rotation_block() {
        let m = DMatrix::from_row_slice(2, 2, &[0.3, 0.4, -0.4, 0.3]);
        let mut ev = eigenvalues_real(&m).unwrap();
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((ev[0] - Complex64::new(0.3, -0.4)).norm() < 1e-12);
        assert!((ev[1] - Complex64::new(0.3, 0.4)).norm() < 1e-12);
    }

    #[test]
    fn rank_counts_above_cutoff() {
        assert_eq!(numerical_rank(&[1.0, 1e-1, 1e-14], 3, 3, Some(1e-10)), 2);
        assert_eq!(numerical_rank(&[0.0], 1, 1, Some(1e-10)), 0);
    }
}
