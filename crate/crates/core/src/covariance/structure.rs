use super::graph::{icar_precision, AdjacencyGraph};
use super::{chol_log_det, cholesky};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Relative eigenvalue cutoff for the generalized inverse.
const NULL_EIGEN_RTOL: f64 = 1e-10;
/// Smallest retained eigenvalue ratio before a graph is reported as ill-conditioned.
const ILL_CONDITIONED_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Independent,
    Exchangeable,
    Bym2,
}

impl StructureKind {
    pub const ALL: [StructureKind; 3] = [StructureKind::Independent, StructureKind::Exchangeable, StructureKind::Bym2];

    pub fn label(&self) -> &'static str {
        match self {
            StructureKind::Independent => "independent",
            StructureKind::Exchangeable => "exchangeable",
            StructureKind::Bym2 => "bym2",
        }
    }
}

impl std::str::FromStr for StructureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "independent" | "iid" | "ind" => Ok(StructureKind::Independent),
            "exchangeable" | "exch" => Ok(StructureKind::Exchangeable),
            "bym2" => Ok(StructureKind::Bym2),
            other => Err(Error::Domain(format!("unknown correlation structure '{other}'"))),
        }
    }
}

/// Scaled generalized inverse of an ICAR precision, kept with its
/// eigendecomposition so BYM2 correlations can be inverted in closed form.
#[derive(Debug, Clone)]
pub struct ScaledIcar {
    matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    reference_variance: f64,
    condition: f64,
}

impl ScaledIcar {
    pub fn from_graph(graph: &AdjacencyGraph) -> Result<Self> {
        scaled_generalized_inverse(&icar_precision(graph))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn strata(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues of the scaled generalized inverse (one of them zero).
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Geometric mean of the marginal variances of the unscaled inverse.
    pub fn reference_variance(&self) -> f64 {
        self.reference_variance
    }

    /// Ratio of the smallest retained to the largest eigenvalue of `Q`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn is_ill_conditioned(&self) -> bool {
        self.condition < ILL_CONDITIONED_RTOL
    }
}

/// Moore-Penrose inverse of a connected ICAR precision, divided by the
/// geometric mean of its diagonal.
pub fn scaled_generalized_inverse(q: &DMatrix<f64>) -> Result<ScaledIcar> {
    let n = q.nrows();
    if n < 2 || q.ncols() != n {
        return Err(Error::Dimension(format!("ICAR precision must be square with >= 2 strata, got {n}x{}", q.ncols())));
    }
    let eig = SymmetricEigen::new(q.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = NULL_EIGEN_RTOL * max;
    let null = eig.eigenvalues.iter().filter(|&&l| l <= cutoff).count();
    if null != 1 {
        return Err(Error::DisconnectedGraph { components: null });
    }
    let min_kept = eig.eigenvalues.iter().cloned().filter(|&l| l > cutoff).fold(f64::INFINITY, f64::min);

    let inv_eigs: Vec<f64> = eig.eigenvalues.iter().map(|&l| if l > cutoff { 1.0 / l } else { 0.0 }).collect();
    let mut ginv = DMatrix::zeros(n, n);
    for (c, &w) in inv_eigs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(c);
        ginv += w * v * v.transpose();
    }
    let reference_variance = (ginv.diagonal().iter().map(|d| d.ln()).sum::<f64>() / n as f64).exp();
    let matrix = ginv / reference_variance;
    Ok(ScaledIcar {
        matrix,
        eigenvalues: DVector::from_iterator(n, inv_eigs.iter().map(|w| w / reference_variance)),
        eigenvectors: eig.eigenvectors,
        reference_variance,
        condition: min_kept / max,
    })
}

fn exchangeable_bounds(strata: usize) -> (f64, f64) {
    if strata <= 1 {
        (f64::NEG_INFINITY, 1.0)
    } else {
        (-1.0 / (strata as f64 - 1.0), 1.0)
    }
}

/// Unit diagonal, `rho` off the diagonal, for `rho` in `(-1/(R-1), 1)`.
pub fn exchangeable_corr(strata: usize, rho: f64) -> Result<DMatrix<f64>> {
    let (lo, hi) = exchangeable_bounds(strata);
    if !(rho > lo && rho < hi) {
        return Err(Error::Domain(format!("exchangeable correlation {rho} outside ({lo}, {hi}) for R = {strata}")));
    }
    Ok(DMatrix::from_fn(strata, strata, |i, j| if i == j { 1.0 } else { rho }))
}

/// BYM2 mixture `(1 - rho) I + rho Q*`, `rho` in `(0, 1)`.
pub fn bym2_corr(rho: f64, scaled: &ScaledIcar) -> Result<DMatrix<f64>> {
    check_bym2(rho)?;
    let n = scaled.strata();
    Ok(DMatrix::identity(n, n) * (1.0 - rho) + scaled.matrix() * rho)
}

fn check_bym2(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("BYM2 mixing parameter {rho} outside (0, 1)")));
    }
    Ok(())
}

/// Correlation family without its parameter value.
#[derive(Debug, Clone)]
pub enum CorrelationFamily {
    Independent,
    Exchangeable,
    Bym2(Arc<ScaledIcar>),
}

impl CorrelationFamily {
    pub fn kind(&self) -> StructureKind {
        match self {
            CorrelationFamily::Independent => StructureKind::Independent,
            CorrelationFamily::Exchangeable => StructureKind::Exchangeable,
            CorrelationFamily::Bym2(_) => StructureKind::Bym2,
        }
    }

    pub fn has_parameter(&self) -> bool {
        !matches!(self, CorrelationFamily::Independent)
    }
}

/// A fully specified cross-strata correlation matrix.
#[derive(Debug, Clone)]
pub struct CrossStrataStructure {
    family: CorrelationFamily,
    strata: usize,
    rho: Option<f64>,
}

impl CrossStrataStructure {
    pub fn independent(strata: usize) -> Self {
        Self { family: CorrelationFamily::Independent, strata, rho: None }
    }

    pub fn exchangeable(strata: usize, rho: f64) -> Result<Self> {
        let (lo, hi) = exchangeable_bounds(strata);
        if !(rho > lo && rho < hi) {
            return Err(Error::Domain(format!("exchangeable correlation {rho} outside ({lo}, {hi}) for R = {strata}")));
        }
        Ok(Self { family: CorrelationFamily::Exchangeable, strata, rho: Some(rho) })
    }

    pub fn bym2(scaled: Arc<ScaledIcar>, rho: f64) -> Result<Self> {
        check_bym2(rho)?;
        let strata = scaled.strata();
        Ok(Self { family: CorrelationFamily::Bym2(scaled), strata, rho: Some(rho) })
    }

    pub fn new(family: &CorrelationFamily, strata: usize, rho: Option<f64>) -> Result<Self> {
        match (family, rho) {
            (CorrelationFamily::Independent, _) => Ok(Self::independent(strata)),
            (CorrelationFamily::Exchangeable, Some(r)) => Self::exchangeable(strata, r),
            (CorrelationFamily::Bym2(s), Some(r)) => {
                if s.strata() != strata {
                    return Err(Error::Dimension(format!("graph has {} strata, model has {strata}", s.strata())));
                }
                Self::bym2(s.clone(), r)
            }
            (_, None) => Err(Error::Domain("correlated structure needs a rho value".into())),
        }
    }

    pub fn kind(&self) -> StructureKind {
        self.family.kind()
    }

    pub fn rho(&self) -> Option<f64> {
        self.rho
    }

    pub fn strata(&self) -> usize {
        self.strata
    }

    pub fn correlation(&self) -> DMatrix<f64> {
        match (&self.family, self.rho) {
            (CorrelationFamily::Independent, _) => DMatrix::identity(self.strata, self.strata),
            (CorrelationFamily::Exchangeable, Some(r)) => {
                DMatrix::from_fn(self.strata, self.strata, |i, j| if i == j { 1.0 } else { r })
            }
            (CorrelationFamily::Bym2(s), Some(r)) => bym2_corr(r, s).expect("rho validated at construction"),
            _ => unreachable!("rho validated at construction"),
        }
    }

    /// `(Sigma^-1, log|Sigma|)`.
    pub fn inverse_and_log_det(&self) -> Result<(DMatrix<f64>, f64)> {
        let n = self.strata;
        match (&self.family, self.rho) {
            (CorrelationFamily::Independent, _) => Ok((DMatrix::identity(n, n), 0.0)),
            (CorrelationFamily::Exchangeable, Some(r)) => {
                // eigenvalues 1 - r (R-1 times) and 1 + (R-1) r
                let big = 1.0 + (n as f64 - 1.0) * r;
                let small = 1.0 - r;
                let off = -r / (small * big);
                let inv = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / small + off } else { off });
                Ok((inv, (n as f64 - 1.0) * small.ln() + big.ln()))
            }
            (CorrelationFamily::Bym2(s), Some(r)) => {
                let mixed: Vec<f64> = s.eigenvalues.iter().map(|&l| 1.0 - r + r * l).collect();
                let v = &s.eigenvectors;
                let scaled = DMatrix::from_fn(n, n, |i, c| v[(i, c)] / mixed[c]);
                Ok((scaled * v.transpose(), mixed.iter().map(|m| m.ln()).sum()))
            }
            _ => unreachable!("rho validated at construction"),
        }
    }

    /// Dense Cholesky route for the same quantities; used to cross-check.
    pub fn inverse_and_log_det_dense(&self) -> Result<(DMatrix<f64>, f64)> {
        let chol = cholesky(&self.correlation(), "cross-strata correlation")?;
        Ok((chol.inverse(), chol_log_det(&chol)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> AdjacencyGraph {
        AdjacencyGraph::new(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    #[test]
    fn exchangeable_examples() {
        assert_eq!(exchangeable_corr(3, 0.0).unwrap(), DMatrix::identity(3, 3));
        assert!(exchangeable_corr(3, -0.5).is_err());
        assert!(exchangeable_corr(3, 1.0).is_err());
        assert!(exchangeable_corr(3, -0.4999).is_ok());
        let c = exchangeable_corr(4, 0.5).unwrap();
        let min = SymmetricEigen::new(c).eigenvalues.min();
        assert!((min - 0.5).abs() < 1e-12);
    }

    #[test]
    fn path_pair_pseudoinverse() {
        let s = ScaledIcar::from_graph(&path(2)).unwrap();
        assert!((s.reference_variance() - 0.25).abs() < 1e-14);
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!((s.matrix() - expected).abs().max() < 1e-12);
        let b = bym2_corr(0.5, &s).unwrap();
        assert!((b - DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0])).abs().max() < 1e-12);
    }

    #[test]
    fn scaled_inverse_properties() {
        let g = AdjacencyGraph::new(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 3), (1, 4)]).unwrap();
        let s = ScaledIcar::from_graph(&g).unwrap();
        let m = s.matrix();
        let gm = (m.diagonal().iter().map(|d| d.ln()).sum::<f64>() / 6.0).exp();
        assert!((gm - 1.0).abs() < 1e-10);
        assert!((m - m.transpose()).abs().max() < 1e-12);
        assert!((m * DVector::from_element(6, 1.0)).abs().max() < 1e-10);
        assert!(SymmetricEigen::new(m.clone()).eigenvalues.min() > -1e-10);
    }

    #[test]
    fn disconnected_graph_rejected() {
        let g = AdjacencyGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(ScaledIcar::from_graph(&g), Err(Error::DisconnectedGraph { components: 2 })));
    }

    #[test]
    fn bym2_domain() {
        let s = ScaledIcar::from_graph(&path(3)).unwrap();
        assert!(bym2_corr(0.0, &s).is_err());
        assert!(bym2_corr(1.0, &s).is_err());
        let near_zero = bym2_corr(1e-12, &s).unwrap();
        assert!((near_zero - DMatrix::identity(3, 3)).abs().max() < 1e-11);
    }

    #[test]
    fn closed_form_inverse_matches_cholesky() {
        let s = Arc::new(ScaledIcar::from_graph(&path(5)).unwrap());
        let cases = [
            CrossStrataStructure::independent(5),
            CrossStrataStructure::exchangeable(5, 0.4).unwrap(),
            CrossStrataStructure::exchangeable(5, -0.2).unwrap(),
            CrossStrataStructure::bym2(s.clone(), 0.3).unwrap(),
            CrossStrataStructure::bym2(s, 0.95).unwrap(),
        ];
        for c in cases {
            let (inv, ld) = c.inverse_and_log_det().unwrap();
            let (inv2, ld2) = c.inverse_and_log_det_dense().unwrap();
            assert!((inv - inv2).abs().max() < 1e-9, "{:?}", c.kind());
            assert!((ld - ld2).abs() < 1e-10);
        }
    }

    #[test]
    fn parse_kind_labels() {
        assert_eq!("iid".parse::<StructureKind>().unwrap(), StructureKind::Independent);
        assert_eq!("BYM2".parse::<StructureKind>().unwrap(), StructureKind::Bym2);
        assert!("car".parse::<StructureKind>().is_err());
    }
}
