use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

/// Independent normal prior on the population-mean baseline coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineMeanPrior {
    pub mean: [f64; 3],
    pub variance: [f64; 3],
}

impl Default for BaselineMeanPrior {
    /// 5 per 1000 person-years at baseline, a 35% age-slope increase and a
    /// 10% cohort-slope decrease.
    fn default() -> Self {
        Self { mean: [0.005f64.ln(), 0.3, -0.1], variance: [1.0, 0.1, 0.1] }
    }
}

impl BaselineMeanPrior {
    pub fn new(mean: [f64; 3], variance: [f64; 3]) -> Result<Self> {
        if variance.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("baseline prior variances must be positive, got {variance:?}")));
        }
        Ok(Self { mean, variance })
    }

    pub fn logpdf(&self, x: &[f64; 3]) -> f64 {
        (0..3)
            .map(|c| {
                let z = x[c] - self.mean[c];
                -0.5 * ((2.0 * PI * self.variance[c]).ln() + z * z / self.variance[c])
            })
            .sum()
    }

    /// Central interval of coordinate `c` on the log scale.
    pub fn interval(&self, c: usize, level: f64) -> (f64, f64) {
        let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
        let sd = self.variance[c].sqrt();
        (self.mean[c] - z * sd, self.mean[c] + z * sd)
    }

    /// Same interval exponentiated: a rate for the first coordinate, relative
    /// risks for the two slopes.
    pub fn interval_exp(&self, c: usize, level: f64) -> (f64, f64) {
        let (lo, hi) = self.interval(c, level);
        (lo.exp(), hi.exp())
    }
}
