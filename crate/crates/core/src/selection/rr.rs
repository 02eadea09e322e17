use crate::apc::GridSpec;
use crate::error::{Error, Result};
use crate::inference::{quantile, Block, PosteriorFit, SharingPattern};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const AMBIGUITY_NOTE: &str = "Cross-strata relative risks are identified only up to a multiplicative constant: \
the curve shape is estimable but its level is not. Values are normalized so the first index equals 1.";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RrCurve {
    pub block: Block,
    pub stratum_1: usize,
    pub stratum_2: usize,
    /// Period or cohort index, 1-based.
    pub index: Vec<usize>,
    pub median: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level_identified: bool,
    pub note: String,
}

/// Least-squares split of a log-rate difference surface into
/// `c + f_j + h_k` with `f_1 = h_1 = 0`.
struct Splitter {
    grid: GridSpec,
    pinv: DMatrix<f64>,
}

impl Splitter {
    fn new(grid: &GridSpec) -> Result<Self> {
        let (a, t, k) = (grid.ages(), grid.periods(), grid.cohorts());
        let cols = 1 + (t - 1) + (k - 1);
        let mut x = DMatrix::zeros(grid.cells(), cols);
        for j in 1..=t {
            for i in 1..=a {
                let row = grid.cell_index(i, j);
                x[(row, 0)] = 1.0;
                if j > 1 {
                    x[(row, j - 1)] = 1.0;
                }
                let c = grid.cohort(i, j)?;
                if c > 1 {
                    x[(row, t - 1 + c - 1)] = 1.0;
                }
            }
        }
        let pinv = x.pseudo_inverse(1e-12).map_err(|e| Error::Domain(e.to_string()))?;
        Ok(Self { grid: *grid, pinv })
    }

    /// `(c, f, h)` with `f` of length `T` and `h` of length `K`.
    fn split(&self, d: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let coef = &self.pinv * DVector::from_column_slice(d);
        let t = self.grid.periods();
        let mut f = vec![0.0];
        f.extend(coef.rows(1, t - 1).iter());
        let mut h = vec![0.0];
        h.extend(coef.rows(t, self.grid.cohorts() - 1).iter());
        (coef[0], f, h)
    }
}

/// Raw and first-normalized relative-risk curves between two log-rate
/// surfaces that share their age effect.
pub fn rr_from_log_rates(grid: &GridSpec, mu1: &[f64], mu2: &[f64], block: Block) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = Splitter::new(grid)?;
    let d: Vec<f64> = mu1.iter().zip(mu2).map(|(a, b)| a - b).collect();
    Ok(curves(&s, &d, block))
}

fn curves(s: &Splitter, d: &[f64], block: Block) -> (Vec<f64>, Vec<f64>) {
    let (c, f, h) = s.split(d);
    let effect = if block == Block::Period { f } else { h };
    let raw: Vec<f64> = effect.iter().map(|e| (c + e).exp()).collect();
    let first = raw[0];
    let normalized = raw.iter().map(|r| r / first).collect();
    (raw, normalized)
}

pub fn licenses_contrast(pattern: SharingPattern) -> bool {
    pattern.is_shared(Block::Age)
}

/// Posterior summaries of the normalized relative-risk curve of stratum
/// `r1` against `r2` over periods or cohorts.
pub fn cross_strata_rr(fit: &PosteriorFit, grid: &GridSpec, block: Block, r1: usize, r2: usize) -> Result<RrCurve> {
    if !matches!(block, Block::Period | Block::Cohort) {
        return Err(Error::Domain("relative-risk curves are defined over periods or cohorts".into()));
    }
    if !licenses_contrast(fit.pattern) {
        return Err(Error::Model(format!(
            "{} lets the age effect vary by stratum, so cross-strata {} ratios are not identified",
            fit.pattern,
            if block == Block::Period { "period" } else { "cohort" }
        )));
    }
    let cells = grid.cells();
    let strata = fit.logrates_samples.ncols() / cells;
    if r1 >= strata || r2 >= strata || r1 == r2 {
        return Err(Error::Index(format!("strata {r1} and {r2} must be distinct and below {strata}")));
    }
    let s = Splitter::new(grid)?;
    let len = if block == Block::Period { grid.periods() } else { grid.cohorts() };
    let n = fit.logrates_samples.nrows();
    let mut draws = vec![Vec::with_capacity(n); len];
    for row in 0..n {
        let mu = fit.logrates_samples.row(row);
        let d: Vec<f64> = (0..cells).map(|c| mu[r1 * cells + c] - mu[r2 * cells + c]).collect();
        let (_, norm) = curves(&s, &d, block);
        for (k, v) in norm.into_iter().enumerate() {
            draws[k].push(v);
        }
    }
    let q = |p: f64| draws.iter().map(|d| quantile(d.iter().copied(), p)).collect::<Vec<_>>();
    Ok(RrCurve {
        block,
        stratum_1: r1,
        stratum_2: r2,
        index: (1..=len).collect(),
        median: q(0.5),
        lower: q(0.025),
        upper: q(0.975),
        level_identified: false,
        note: AMBIGUITY_NOTE.to_string(),
    })
}
