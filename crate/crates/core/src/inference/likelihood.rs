use super::data::MortalityDataset;
use super::model::LatentModel;
use crate::error::{Error, Result};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Contribution of one cell at log rate `mu`: value, first derivative and
/// negative second derivative (the IRLS weight).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellTerm {
    pub value: f64,
    pub grad: f64,
    pub weight: f64,
}

/// Observation model on the stacked log-rate vector.
pub trait Likelihood: Sync {
    fn len(&self) -> usize;

    fn is_observed(&self, index: usize) -> bool;

    /// Only called for observed cells.
    fn term(&self, index: usize, mu: f64) -> CellTerm;

    /// Rough log rate implied by the observation alone, for initialization.
    fn crude_log_rate(&self, _index: usize) -> Option<f64> {
        None
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct PoissonLikelihood<'a> {
    data: &'a MortalityDataset,
    log_exposure: Vec<f64>,
    log_factorial: Vec<f64>,
}

impl<'a> PoissonLikelihood<'a> {
    pub fn new(data: &'a MortalityDataset) -> Self {
        let log_exposure = data.exposure().iter().map(|n| if *n > 0.0 { n.ln() } else { 0.0 }).collect();
        let log_factorial = data.deaths().iter().map(|&y| ln_gamma(y as f64 + 1.0)).collect();
        Self { data, log_exposure, log_factorial }
    }

    pub fn data(&self) -> &MortalityDataset {
        self.data
    }
}

impl Likelihood for PoissonLikelihood<'_> {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn is_observed(&self, index: usize) -> bool {
        self.data.observed()[index]
    }

    fn term(&self, k: usize, mu: f64) -> CellTerm {
        let y = self.data.deaths()[k] as f64;
        let expected = (self.log_exposure[k] + mu).exp();
        CellTerm {
            value: y * (self.log_exposure[k] + mu) - expected - self.log_factorial[k],
            grad: y - expected,
            weight: expected,
        }
    }

    fn crude_log_rate(&self, k: usize) -> Option<f64> {
        let n = self.data.exposure()[k];
        (n > 0.0).then(|| ((self.data.deaths()[k] as f64 + 0.5) / n).ln())
    }
}

/// Independent normal observations of the log rates with known variance.
/// Conjugate to the latent prior, so the Laplace approximation is exact.
#[derive(Debug, Clone)]
pub struct GaussianLikelihood {
    y: Vec<f64>,
    observed: Vec<bool>,
    variance: f64,
}

impl GaussianLikelihood {
    pub fn new(y: Vec<f64>, observed: Vec<bool>, variance: f64) -> Result<Self> {
        if y.len() != observed.len() {
            return Err(Error::Dimension("observation and mask lengths differ".into()));
        }
        if !(variance > 0.0) {
            return Err(Error::Domain("observation variance must be positive".into()));
        }
        Ok(Self { y, observed, variance })
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

impl Likelihood for GaussianLikelihood {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn is_observed(&self, index: usize) -> bool {
        self.observed[index]
    }

    fn term(&self, k: usize, mu: f64) -> CellTerm {
        let r = self.y[k] - mu;
        CellTerm {
            value: -0.5 * ((2.0 * PI * self.variance).ln() + r * r / self.variance),
            grad: r / self.variance,
            weight: 1.0 / self.variance,
        }
    }

    fn crude_log_rate(&self, k: usize) -> Option<f64> {
        Some(self.y[k])
    }
}

/// Log-likelihood at a latent vector, its gradient in the free coordinates
/// and the per-cell weights (zero on missing cells).
#[derive(Debug, Clone)]
pub struct LikelihoodEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn evaluate_likelihood<L: Likelihood + ?Sized>(model: &LatentModel, lik: &L, xi: &[f64]) -> Result<LikelihoodEval> {
    if lik.len() != model.stacked_cells() {
        return Err(Error::Dimension(format!("likelihood covers {} cells, model {}", lik.len(), model.stacked_cells())));
    }
    let mu = model.log_rates(xi)?;
    let mut value = 0.0;
    let mut resid = vec![0.0; mu.len()];
    let mut weights = vec![0.0; mu.len()];
    for (k, &m) in mu.iter().enumerate() {
        if !lik.is_observed(k) {
            continue;
        }
        if !m.is_finite() {
            return Err(Error::NonFinite(format!("log rate at cell {k}")));
        }
        let t = lik.term(k, m);
        if !t.value.is_finite() {
            return Err(Error::NonFinite(format!("likelihood at cell {k} (log rate {m})")));
        }
        value += t.value;
        resid[k] = t.grad;
        weights[k] = t.weight;
    }
    let gradient = model.transpose_apply(&resid);
    Ok(LikelihoodEval { value, gradient, weights })
}

/// Poisson log-likelihood `sum y (log N + mu) - N e^mu - log y!` over the
/// observed cells.
pub fn poisson_loglik(xi: &[f64], model: &LatentModel, data: &MortalityDataset) -> Result<LikelihoodEval> {
    evaluate_likelihood(model, &PoissonLikelihood::new(data), xi)
}
