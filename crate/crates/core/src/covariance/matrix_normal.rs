use super::{chol_log_det, cholesky};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// `X ~ MN(mean, row_cov, col_cov)`, i.e. `vec(X) ~ N(vec(mean), col_cov (x) row_cov)`.
#[derive(Debug, Clone)]
pub struct MatrixNormalParams {
    pub mean: DMatrix<f64>,
    pub row_cov: DMatrix<f64>,
    pub col_cov: DMatrix<f64>,
}

impl MatrixNormalParams {
    pub fn new(mean: DMatrix<f64>, row_cov: DMatrix<f64>, col_cov: DMatrix<f64>) -> Result<Self> {
        let (nr, nc) = mean.shape();
        if row_cov.shape() != (nr, nr) || col_cov.shape() != (nc, nc) {
            return Err(Error::Dimension(format!(
                "mean {nr}x{nc} needs covariances {nr}x{nr} and {nc}x{nc}, got {:?} and {:?}",
                row_cov.shape(),
                col_cov.shape()
            )));
        }
        Ok(Self { mean, row_cov, col_cov })
    }
}

/// Log density via the trace form; the Kronecker product is never formed.
pub fn matrix_normal_logpdf(x: &DMatrix<f64>, p: &MatrixNormalParams) -> Result<f64> {
    if x.shape() != p.mean.shape() {
        return Err(Error::Dimension(format!("X is {:?}, mean is {:?}", x.shape(), p.mean.shape())));
    }
    let (nr, nc) = x.shape();
    let row = cholesky(&p.row_cov, "row covariance")?;
    let col = cholesky(&p.col_cov, "column covariance")?;
    let resid = x - &p.mean;
    // || L_R^-1 E L_C^-T ||_F^2 = tr[Sigma_C^-1 E' Sigma_R^-1 E]
    let a = row.l_dirty().solve_lower_triangular(&resid).expect("nonsingular factor");
    let b = col.l_dirty().solve_lower_triangular(&a.transpose()).expect("nonsingular factor");
    let trace = b.norm_squared();
    let n = (nr * nc) as f64;
    Ok(-0.5 * (n * (2.0 * PI).ln() + nr as f64 * chol_log_det(&col) + nc as f64 * chol_log_det(&row) + trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_standard_normal() {
        let p = MatrixNormalParams::new(DMatrix::zeros(1, 1), DMatrix::identity(1, 1), DMatrix::identity(1, 1)).unwrap();
        let v = matrix_normal_logpdf(&DMatrix::zeros(1, 1), &p).unwrap();
        assert!((v + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn dimension_and_definiteness_errors() {
        assert!(MatrixNormalParams::new(DMatrix::zeros(2, 3), DMatrix::identity(3, 3), DMatrix::identity(3, 3)).is_err());
        let p = MatrixNormalParams::new(DMatrix::zeros(2, 2), -DMatrix::identity(2, 2), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(matrix_normal_logpdf(&DMatrix::zeros(2, 2), &p), Err(Error::NotPositiveDefinite(_))));
    }
}
