//! Cross-strata covariance structures and the matrix-normal density.

mod graph;
mod kron;
mod matrix_normal;
mod structure;

pub use graph::{icar_precision, AdjacencyGraph};
pub use kron::{block_prior_precision, KroneckerPrecision};
pub use matrix_normal::{matrix_normal_logpdf, MatrixNormalParams};
pub use structure::{
    bym2_corr, exchangeable_corr, scaled_generalized_inverse, CorrelationFamily, CrossStrataStructure, ScaledIcar,
    StructureKind,
};

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, Dyn};

/// Cholesky factor with a descriptive error on failure.
pub(crate) fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

pub(crate) fn chol_log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}
