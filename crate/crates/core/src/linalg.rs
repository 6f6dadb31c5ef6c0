//! Dense linear algebra on `ndarray` matrices, backed by `nalgebra` decompositions.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

pub fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigen-decomposition of a symmetric matrix: eigenvalues and column eigenvectors.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Estimator(
            "eigendecomposition of a matrix with non-finite entries".into(),
        ));
    }
    let m = to_dmatrix(a);
    let eig = nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Estimator("symmetric eigendecomposition did not converge".into())
    })?;
    Ok((
        Array1::from_iter(eig.eigenvalues.iter().copied()),
        from_dmatrix(&eig.eigenvectors),
    ))
}

pub fn min_eigenvalue(a: ArrayView2<f64>) -> Result<f64> {
    let (vals, _) = symmetric_eigen(a)?;
    Ok(vals.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Nearest positive semidefinite correlation matrix by eigenvalue clipping at
/// `floor`, followed by rescaling to a unit diagonal.
pub fn project_psd_correlation(a: ArrayView2<f64>, floor: f64) -> Result<Array2<f64>> {
    let (vals, vecs) = symmetric_eigen(a)?;
    let clipped = vals.mapv(|v| v.max(floor));
    let scaled = &vecs * &clipped;
    let mut out = scaled.dot(&vecs.t());
    let d: Vec<f64> = (0..out.nrows()).map(|i| out[[i, i]].sqrt()).collect();
    let p = out.nrows();
    for i in 0..p {
        for j in 0..p {
            out[[i, j]] /= d[i] * d[j];
        }
    }
    symmetrize_unit_diagonal(&mut out);
    Ok(out)
}

/// Averages with the transpose, sets the diagonal to exactly 1 and clips into [-1, 1].
pub fn symmetrize_unit_diagonal(a: &mut Array2<f64>) {
    let p = a.nrows();
    for i in 0..p {
        a[[i, i]] = 1.0;
        for j in (i + 1)..p {
            let v = (0.5 * (a[[i, j]] + a[[j, i]])).clamp(-1.0, 1.0);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
}

pub fn inverse(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    to_dmatrix(a).try_inverse().map(|m| from_dmatrix(&m))
}

/// log det of a symmetric positive-definite matrix, `None` when Cholesky fails.
pub fn log_det_spd(a: ArrayView2<f64>) -> Option<f64> {
    let chol = nalgebra::Cholesky::new(to_dmatrix(a))?;
    let l = chol.l();
    Some(2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

pub fn is_positive_definite(a: ArrayView2<f64>) -> bool {
    nalgebra::Cholesky::new(to_dmatrix(a)).is_some()
}

pub fn solve(a: ArrayView2<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let lu = to_dmatrix(a).lu();
    let x = lu.solve(&DVector::from_column_slice(b))?;
    Some(x.iter().copied().collect())
}

/// Covariance to correlation: `D^{-1/2} S D^{-1/2}`.
pub fn cov_to_cor(s: ArrayView2<f64>) -> Array2<f64> {
    let p = s.nrows();
    let d: Vec<f64> = (0..p).map(|i| s[[i, i]].max(f64::MIN_POSITIVE).sqrt()).collect();
    let mut out = Array2::from_shape_fn((p, p), |(i, j)| s[[i, j]] / (d[i] * d[j]));
    symmetrize_unit_diagonal(&mut out);
    out
}
