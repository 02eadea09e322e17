use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const PIT_BINS: usize = 20;
const DENSITY_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitResult {
    pub values: Vec<f64>,
    /// Density-scaled histogram over `PIT_BINS` equal bins of [0, 1].
    pub histogram: Vec<f64>,
    /// Kernel density on an even grid of [0, 1], as `(x, density)`.
    pub density: Vec<(f64, f64)>,
}

/// Mid-distribution PIT of a count: `(F(y) + F(y - 1)) / 2` under the
/// empirical CDF of the predictive draws.
pub fn pit_value(samples: &[u64], y: u64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("PIT needs predictive samples".into()));
    }
    let n = samples.len() as f64;
    let le = samples.iter().filter(|&&s| s <= y).count() as f64 / n;
    let lt = samples.iter().filter(|&&s| s < y).count() as f64 / n;
    Ok(0.5 * (le + lt))
}

/// PIT values for each cell, a histogram and a boundary-reflected Gaussian
/// kernel density with Silverman's bandwidth.
pub fn pit(samples: &[Vec<u64>], observed: &[u64]) -> Result<PitResult> {
    if samples.len() != observed.len() {
        return Err(Error::Dimension("one sample set per observed count is required".into()));
    }
    if samples.is_empty() {
        return Err(Error::Domain("no cells to evaluate".into()));
    }
    let values = samples.iter().zip(observed).map(|(s, &y)| pit_value(s, y)).collect::<Result<Vec<_>>>()?;
    let n = values.len() as f64;
    let mut histogram = vec![0.0; PIT_BINS];
    for &v in &values {
        let b = ((v * PIT_BINS as f64) as usize).min(PIT_BINS - 1);
        histogram[b] += PIT_BINS as f64 / n;
    }
    Ok(PitResult { density: reflected_kde(&values), values, histogram })
}

fn reflected_kde(values: &[f64]) -> Vec<(f64, f64)> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| crate::inference::quantile(sorted.iter().copied(), p);
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = (0.9 * spread * n.powf(-0.2)).max(1e-3);
    let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
    (0..DENSITY_POINTS)
        .map(|g| {
            let x = g as f64 / (DENSITY_POINTS - 1) as f64;
            let d: f64 = values
                .iter()
                .map(|&v| {
                    let k = |c: f64| (-0.5 * ((x - c) / h).powi(2)).exp();
                    k(v) + k(-v) + k(2.0 - v)
                })
                .sum();
            (x, d * norm)
        })
        .collect()
}

/// Kolmogorov-Smirnov distance of a sample from the uniform on [0, 1].
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (((i + 1) as f64 / n) - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictive_above_observation() {
        assert_eq!(pit_value(&[5, 6, 7], 2).unwrap(), 0.0);
        assert_eq!(pit_value(&[5, 6, 7], 9).unwrap(), 1.0);
        assert!(pit_value(&[], 1).is_err());
    }

    #[test]
    fn median_of_symmetric_predictive() {
        let s: Vec<u64> = (0..=1000).collect();
        assert!((pit_value(&s, 500).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn histogram_and_density_integrate_to_one() {
        let samples: Vec<Vec<u64>> = (0..200).map(|c| (0..100).map(|s| (s * 7 + c) % 50).collect()).collect();
        let obs: Vec<u64> = (0..200).map(|c| (c * 13) % 50).collect();
        let r = pit(&samples, &obs).unwrap();
        assert!(r.values.iter().all(|v| (0.0..=1.0).contains(v)));
        let hist: f64 = r.histogram.iter().sum::<f64>() / PIT_BINS as f64;
        assert!((hist - 1.0).abs() < 1e-12);
        let dx = 1.0 / (DENSITY_POINTS - 1) as f64;
        let integral: f64 = r.density.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * dx).sum();
        assert!((integral - 1.0).abs() < 0.02, "{integral}");
    }

    #[test]
    fn ks_examples() {
        assert!((ks_uniform(&[0.5]) - 0.5).abs() < 1e-12);
        let even: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_uniform(&even) - 0.005).abs() < 1e-12);
    }
}
