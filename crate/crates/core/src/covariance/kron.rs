use super::structure::CrossStrataStructure;
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Precision `Sigma^-1 (x) tau I` of `vec(Xi)` for a `rows x R` matrix `Xi`
/// stacked strata-major (all rows of stratum 1, then stratum 2, ...).
#[derive(Debug, Clone)]
pub struct KroneckerPrecision {
    rows: usize,
    tau: f64,
    corr_inv: DMatrix<f64>,
    corr_log_det: f64,
}

pub fn block_prior_precision(rows: usize, structure: &CrossStrataStructure, tau: f64) -> Result<KroneckerPrecision> {
    KroneckerPrecision::new(rows, structure, tau)
}

impl KroneckerPrecision {
    pub fn new(rows: usize, structure: &CrossStrataStructure, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("precision must be positive and finite, got {tau}")));
        }
        let (corr_inv, corr_log_det) = structure.inverse_and_log_det()?;
        Ok(Self { rows, tau, corr_inv, corr_log_det })
    }

    /// `tau I` of size `rows`, i.e. a single stratum or a shared block.
    pub fn scaled_identity(rows: usize, tau: f64) -> Result<Self> {
        Self::new(rows, &CrossStrataStructure::independent(1), tau)
    }

    pub fn dim(&self) -> usize {
        self.rows * self.strata()
    }

    pub fn strata(&self) -> usize {
        self.corr_inv.nrows()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn as_matrix<'a>(&self, x: &'a [f64]) -> nalgebra::DMatrixView<'a, f64> {
        assert_eq!(x.len(), self.dim(), "vector length");
        nalgebra::DMatrixView::from_slice(x, self.rows, self.strata())
    }

    /// `x' P x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let m = self.as_matrix(x);
        let mc = m * &self.corr_inv;
        self.tau * mc.component_mul(&m).sum()
    }

    /// `P x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.as_matrix(x);
        let out = (m * &self.corr_inv) * self.tau;
        out.as_slice().to_vec()
    }

    /// `log |P| = -rows log|Sigma| + rows R log tau`.
    pub fn log_det(&self) -> f64 {
        -(self.rows as f64) * self.corr_log_det + self.dim() as f64 * self.tau.ln()
    }

    /// Add `P` into `h[offset.., offset..]`.
    pub fn add_to(&self, h: &mut DMatrix<f64>, offset: usize) {
        let r = self.strata();
        for s in 0..r {
            for t in 0..r {
                let v = self.tau * self.corr_inv[(s, t)];
                if v == 0.0 {
                    continue;
                }
                for l in 0..self.rows {
                    h[(offset + s * self.rows + l, offset + t * self.rows + l)] += v;
                }
            }
        }
    }

    /// Draw from `N(0, P^-1)`.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let chol = super::cholesky(&self.corr_inv, "cross-strata precision")?;
        let z = DMatrix::from_fn(self.strata(), self.rows, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let y = chol.l().transpose().solve_upper_triangular(&z).expect("Cholesky factor is nonsingular");
        let scale = 1.0 / self.tau.sqrt();
        Ok(y.transpose().iter().map(|v| v * scale).collect())
    }

    /// Materialized precision, for tests and small problems.
    pub fn dense(&self) -> DMatrix<f64> {
        self.corr_inv.kronecker(&(DMatrix::identity(self.rows, self.rows) * self.tau))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{AdjacencyGraph, ScaledIcar};
    use std::sync::Arc;

    fn vector(n: usize, seed: u64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 + 1.0) * (seed as f64 + 0.37)).sin()).collect()
    }

    #[test]
    fn independent_is_scaled_identity() {
        let p = block_prior_precision(4, &CrossStrataStructure::independent(3), 2.5).unwrap();
        assert_eq!(p.dense(), DMatrix::identity(12, 12) * 2.5);
    }

    #[test]
    fn operator_matches_dense_kronecker() {
        let icar = Arc::new(ScaledIcar::from_graph(&AdjacencyGraph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()).unwrap());
        let structures = [
            CrossStrataStructure::exchangeable(4, 0.6).unwrap(),
            CrossStrataStructure::bym2(icar, 0.4).unwrap(),
        ];
        for s in &structures {
            let p = block_prior_precision(5, s, 3.0).unwrap();
            let d = p.dense();
            let x = vector(20, 3);
            let xv = nalgebra::DVector::from_column_slice(&x);
            assert!((p.quad_form(&x) - (xv.transpose() * &d * &xv)[0]).abs() < 1e-10);
            let px = &d * &xv;
            for (a, b) in p.apply(&x).iter().zip(px.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
            let mut h = DMatrix::zeros(22, 22);
            p.add_to(&mut h, 2);
            assert!((h.view((2, 2), (20, 20)) - &d).abs().max() < 1e-12);
            let ld = d.clone().cholesky().unwrap().l().diagonal().iter().map(|v| 2.0 * v.ln()).sum::<f64>();
            assert!((p.log_det() - ld).abs() < 1e-10);
            let (_, corr_ld) = s.inverse_and_log_det().unwrap();
            assert!((p.log_det() - (-5.0 * corr_ld + 20.0 * 3f64.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn samples_have_the_covariance() {
        use rand::SeedableRng;
        let s = CrossStrataStructure::exchangeable(3, 0.5).unwrap();
        let p = block_prior_precision(2, &s, 4.0).unwrap();
        let cov = p.dense().try_inverse().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = 40_000;
        let mut acc = DMatrix::zeros(6, 6);
        for _ in 0..n {
            let x = nalgebra::DVector::from_vec(p.sample(&mut rng).unwrap());
            acc += &x * x.transpose();
        }
        acc /= n as f64;
        assert!((acc - cov).abs().max() < 0.01);
    }

    #[test]
    fn rejects_bad_tau() {
        assert!(KroneckerPrecision::scaled_identity(3, 0.0).is_err());
        assert!(KroneckerPrecision::scaled_identity(3, f64::NAN).is_err());
    }
}
