use crate::error::{Error, Result};
use crate::inference::{quantile, MortalityDataset, PosteriorFit};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellForecast {
    /// Stacked cell index.
    pub cell: usize,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HindcastResult {
    pub cells: Vec<usize>,
    /// Predictive count draws, one vector per target cell.
    pub samples: Vec<Vec<u64>>,
    pub summaries: Vec<CellForecast>,
}

/// Posterior predictive counts for `targets`: for draw `s` and cell `k`,
/// `Poisson(N_k exp(mu_sk))`, cycling through the posterior log-rate draws.
/// Cell `k` uses stream `k` of the seed.
pub fn hindcast(fit: &PosteriorFit, data: &MortalityDataset, targets: &[usize], n: usize, seed: u64) -> Result<HindcastResult> {
    let mu = &fit.logrates_samples;
    if mu.nrows() == 0 || n == 0 {
        return Err(Error::Domain("hindcast needs posterior draws and n > 0".into()));
    }
    if mu.ncols() != data.len() {
        return Err(Error::Dimension("fit and data cover different cells".into()));
    }
    let mut samples = Vec::with_capacity(targets.len());
    let mut summaries = Vec::with_capacity(targets.len());
    for &k in targets {
        if k >= data.len() {
            return Err(Error::Index(format!("target cell {k} outside the grid")));
        }
        let exposure = data.exposure()[k];
        if !(exposure > 0.0) {
            return Err(Error::Data(format!("target cell {k} has no exposure")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let draws: Vec<u64> = (0..n)
            .map(|s| {
                let lambda = exposure * mu[(s % mu.nrows(), k)].exp();
                if lambda > 0.0 && lambda.is_finite() {
                    Poisson::new(lambda).expect("positive mean").sample(&mut rng) as u64
                } else {
                    0
                }
            })
            .collect();
        let q = |p| quantile(draws.iter().map(|&d| d as f64), p);
        summaries.push(CellForecast { cell: k, median: q(0.5), lower: q(0.025), upper: q(0.975) });
        samples.push(draws);
    }
    Ok(HindcastResult { cells: targets.to_vec(), samples, summaries })
}
