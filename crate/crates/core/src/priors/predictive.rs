use super::hyper::{HyperParameters, PriorConfig};
use crate::error::{Error, Result};
use crate::inference::{LatentModel, MortalityDataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Log rates above this make a simulation degenerate.
pub const MAX_LOG_RATE: f64 = 30.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorPredictiveSummary {
    pub sims: usize,
    /// Simulations with an overflowing rate; excluded from everything below.
    pub degenerate: usize,
    pub max_counts: Vec<u64>,
    pub min_counts: Vec<u64>,
    /// Mean simulated count per stacked cell (zero where unobserved).
    pub mean_counts: Vec<f64>,
    pub observed_max: u64,
    pub observed_min: u64,
    /// Share of simulations whose maximum exceeds the observed maximum.
    pub exceed_max_fraction: f64,
    /// Share of simulations whose minimum is below the observed minimum.
    pub below_min_fraction: f64,
}

enum Sim {
    Degenerate,
    Counts(Vec<u64>),
}

/// Prior predictive draws of the counts on the observed cells of `data`:
/// hyperparameters from their priors (or `fixed`), the latent field from its
/// Gaussian prior, then Poisson counts. Simulation `s` uses stream `s` of
/// the master seed, so results do not depend on the thread count.
pub fn sample_prior_predictive(
    model: &LatentModel,
    data: &MortalityDataset,
    priors: &PriorConfig,
    n_sims: usize,
    seed: u64,
    fixed: Option<&HyperParameters>,
) -> Result<PriorPredictiveSummary> {
    if data.grid() != model.grid() || data.strata() != model.strata() {
        return Err(Error::Dimension("dataset and model dimensions differ".into()));
    }
    if data.observed_count() == 0 {
        return Err(Error::Data("no observed cells to simulate".into()));
    }
    let hyper = model.hyper_prior(priors)?;
    let observed: Vec<usize> = (0..data.len()).filter(|&k| data.observed()[k]).collect();
    let sims: Vec<Sim> = (0..n_sims)
        .into_par_iter()
        .map(|s| -> Result<Sim> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let eta = match fixed {
                Some(e) => e.clone(),
                None => hyper.sample(&mut rng),
            };
            let xi = model.latent_prior(&eta, &priors.baseline_mean)?.sample(&mut rng)?;
            let mu = model.log_rates(&xi)?;
            if observed.iter().any(|&k| !(mu[k] <= MAX_LOG_RATE)) {
                return Ok(Sim::Degenerate);
            }
            let mut counts = vec![0u64; data.len()];
            for &k in &observed {
                let lambda = data.exposure()[k] * mu[k].exp();
                if !(lambda.is_finite() && lambda < 1e15) {
                    return Ok(Sim::Degenerate);
                }
                counts[k] = if lambda > 0.0 { Poisson::new(lambda).expect("positive mean").sample(&mut rng) as u64 } else { 0 };
            }
            Ok(Sim::Counts(counts))
        })
        .collect::<Result<_>>()?;

    let obs_max = observed.iter().map(|&k| data.deaths()[k]).max().unwrap_or(0);
    let obs_min = observed.iter().map(|&k| data.deaths()[k]).min().unwrap_or(0);
    let mut summary = PriorPredictiveSummary {
        sims: n_sims,
        degenerate: 0,
        max_counts: Vec::new(),
        min_counts: Vec::new(),
        mean_counts: vec![0.0; data.len()],
        observed_max: obs_max,
        observed_min: obs_min,
        exceed_max_fraction: 0.0,
        below_min_fraction: 0.0,
    };
    for sim in sims {
        match sim {
            Sim::Degenerate => summary.degenerate += 1,
            Sim::Counts(c) => {
                let max = observed.iter().map(|&k| c[k]).max().unwrap_or(0);
                let min = observed.iter().map(|&k| c[k]).min().unwrap_or(0);
                summary.max_counts.push(max);
                summary.min_counts.push(min);
                for &k in &observed {
                    summary.mean_counts[k] += c[k] as f64;
                }
            }
        }
    }
    let good = summary.max_counts.len();
    if good > 0 {
        let g = good as f64;
        summary.mean_counts.iter_mut().for_each(|m| *m /= g);
        summary.exceed_max_fraction = summary.max_counts.iter().filter(|&&m| m > obs_max).count() as f64 / g;
        summary.below_min_fraction = summary.min_counts.iter().filter(|&&m| m < obs_min).count() as f64 / g;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apc::{BaselineSpec, GridSpec};
    use crate::covariance::CorrelationFamily;
    use crate::inference::{assemble_model, Block, SharingPattern};
    use crate::priors::{BaselineMeanPrior, HyperParam};

    #[test]
    fn degenerate_prior_is_poisson_sampling() {
        let g = GridSpec::new(3, 3).unwrap();
        let m = assemble_model(&g, 1, SharingPattern::M1, CorrelationFamily::Independent, &BaselineSpec::default_for(&g)).unwrap();
        let level = (0.01f64).ln();
        let priors = PriorConfig {
            baseline_mean: BaselineMeanPrior::new([level, 0.0, 0.0], [1e-14; 3]).unwrap(),
            ..PriorConfig::default()
        };
        let mut eta = HyperParameters::default();
        for b in [Block::Age, Block::Period, Block::Cohort] {
            eta.set(HyperParam::Tau(b), 1e14);
        }
        let n = 1000.0;
        let data = MortalityDataset::complete(g, vec!["a".into()], vec![10; 9], vec![n; 9]).unwrap();
        let sims = 2000;
        let s = sample_prior_predictive(&m, &data, &priors, sims, 5, Some(&eta)).unwrap();
        assert_eq!(s.degenerate, 0);
        let expected = n * 0.01;
        let se = (expected / sims as f64).sqrt();
        for &mc in &s.mean_counts {
            assert!((mc - expected).abs() < 3.0 * se + 1e-9, "{mc} vs {expected}");
        }
        let again = sample_prior_predictive(&m, &data, &priors, sims, 5, Some(&eta)).unwrap();
        assert_eq!(s.max_counts, again.max_counts);
    }

    #[test]
    fn wide_priors_flag_degenerate_sims() {
        let g = GridSpec::new(5, 5).unwrap();
        let m = assemble_model(&g, 1, SharingPattern::M1, CorrelationFamily::Independent, &BaselineSpec::default_for(&g)).unwrap();
        let priors = PriorConfig {
            baseline_mean: BaselineMeanPrior::new([0.0; 3], [1e4; 3]).unwrap(),
            ..PriorConfig::default()
        };
        let data = MortalityDataset::complete(g, vec!["a".into()], vec![10; 25], vec![1e4; 25]).unwrap();
        let s = sample_prior_predictive(&m, &data, &priors, 200, 1, None).unwrap();
        assert!(s.degenerate > 0);
        assert_eq!(s.degenerate + s.max_counts.len(), 200);
    }
}
