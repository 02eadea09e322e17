use crate::error::{Error, Result};
use crate::inference::{MortalityDataset, PosteriorFit};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaicResult {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
    /// Cells whose samples are all `-inf`.
    pub flagged: Vec<usize>,
}

/// WAIC from pointwise log-likelihood draws (rows samples, columns cells),
/// with the variance penalty.
pub fn waic(loglik: &DMatrix<f64>) -> Result<WaicResult> {
    let n = loglik.nrows();
    if n < 2 {
        return Err(Error::Domain("WAIC needs at least two samples".into()));
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    let mut flagged = Vec::new();
    for c in 0..loglik.ncols() {
        let col = loglik.column(c);
        let top = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            flagged.push(c);
            continue;
        }
        let sum: f64 = col.iter().map(|v| (v - top).exp()).sum();
        lppd += top + (sum / n as f64).ln();
        let mean = col.iter().sum::<f64>() / n as f64;
        p_waic += col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    }
    if !flagged.is_empty() {
        return Ok(WaicResult { waic: f64::INFINITY, lppd: f64::NEG_INFINITY, p_waic, flagged });
    }
    Ok(WaicResult { waic: -2.0 * (lppd - p_waic), lppd, p_waic, flagged })
}

/// Poisson log-likelihood of each observed cell under each posterior draw.
pub fn pointwise_loglik(fit: &PosteriorFit, data: &MortalityDataset) -> Result<DMatrix<f64>> {
    let mu = &fit.logrates_samples;
    if mu.ncols() != data.len() {
        return Err(Error::Dimension(format!("fit covers {} cells, data {}", mu.ncols(), data.len())));
    }
    let cells: Vec<usize> = (0..data.len()).filter(|&k| data.observed()[k]).collect();
    let mut out = DMatrix::zeros(mu.nrows(), cells.len());
    for (c, &k) in cells.iter().enumerate() {
        let y = data.deaths()[k] as f64;
        let log_n = data.exposure()[k].ln();
        let lf = ln_gamma(y + 1.0);
        for s in 0..mu.nrows() {
            let eta = log_n + mu[(s, k)];
            out[(s, c)] = y * eta - eta.exp() - lf;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_have_no_penalty() {
        let m = DMatrix::from_row_slice(3, 2, &[-1.0, -2.0, -1.0, -2.0, -1.0, -2.0]);
        let w = waic(&m).unwrap();
        assert_eq!(w.p_waic, 0.0);
        assert!((w.waic - 6.0).abs() < 1e-12);
    }

    #[test]
    fn two_sample_hand_computation() {
        let m = DMatrix::from_row_slice(2, 1, &[-1.0, -3.0]);
        let w = waic(&m).unwrap();
        assert!((w.lppd - (((-1f64).exp() + (-3f64).exp()) / 2.0).ln()).abs() < 1e-14);
        assert!((w.p_waic - 2.0).abs() < 1e-14);
    }

    #[test]
    fn flags_impossible_cells() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, f64::NEG_INFINITY, -3.0, f64::NEG_INFINITY]);
        let w = waic(&m).unwrap();
        assert_eq!(w.flagged, vec![1]);
        assert!(waic(&DMatrix::from_row_slice(1, 1, &[0.0])).is_err());
    }
}
