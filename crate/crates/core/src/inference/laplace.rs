use super::data::MortalityDataset;
use super::likelihood::{evaluate_likelihood, Likelihood, PoissonLikelihood};
use super::mode::{conditional_mode, initial_latent, ConditionalMode, NewtonOptions};
use super::model::{LatentModel, LatentPrior};
use crate::error::Result;
use crate::priors::{HyperParameters, HyperPrior, PriorConfig};
use std::f64::consts::PI;

/// A latent model together with its observations and prior settings.
#[derive(Debug, Clone)]
pub struct InferenceProblem<'a, L: Likelihood + ?Sized> {
    model: &'a LatentModel,
    lik: &'a L,
    priors: PriorConfig,
    hyper: HyperPrior,
    newton: NewtonOptions,
}

/// Laplace approximation of `log p(y | eta) + log p(eta)` and its parts.
#[derive(Debug, Clone)]
pub struct LaplaceEval {
    pub log_marginal: f64,
    pub log_hyperprior: f64,
    pub mode: ConditionalMode,
}

impl<'a, L: Likelihood + ?Sized> InferenceProblem<'a, L> {
    pub fn new(model: &'a LatentModel, lik: &'a L, priors: &PriorConfig) -> Result<Self> {
        let hyper = model.hyper_prior(priors)?;
        Ok(Self { model, lik, priors: priors.clone(), hyper, newton: NewtonOptions::default() })
    }

    pub fn with_newton(mut self, newton: NewtonOptions) -> Self {
        self.newton = newton;
        self
    }

    pub fn model(&self) -> &LatentModel {
        self.model
    }

    pub fn likelihood(&self) -> &L {
        self.lik
    }

    pub fn priors(&self) -> &PriorConfig {
        &self.priors
    }

    pub fn hyper_prior(&self) -> &HyperPrior {
        &self.hyper
    }

    pub fn newton(&self) -> &NewtonOptions {
        &self.newton
    }

    pub fn latent_prior(&self, eta: &HyperParameters) -> Result<LatentPrior> {
        self.model.latent_prior(eta, &self.priors.baseline_mean)
    }

    pub fn initial_latent(&self) -> Vec<f64> {
        initial_latent(self.model, self.lik, &self.priors.baseline_mean)
    }

    pub fn mode(&self, eta: &HyperParameters, init: Option<&[f64]>) -> Result<ConditionalMode> {
        let prior = self.latent_prior(eta)?;
        let start;
        let init = match init {
            Some(x) => x,
            None => {
                start = self.initial_latent();
                &start
            }
        };
        conditional_mode(self.model, &prior, self.lik, Some(init), &self.newton)
    }

    pub fn laplace(&self, eta: &HyperParameters, init: Option<&[f64]>) -> Result<LaplaceEval> {
        let log_hyperprior = self.hyper.log_density(eta)?;
        let mode = self.mode(eta, init)?;
        let d = self.model.free_dim() as f64;
        let log_marginal =
            mode.loglik + mode.log_prior - 0.5 * mode.log_det_hessian() + 0.5 * d * (2.0 * PI).ln() + log_hyperprior;
        Ok(LaplaceEval { log_marginal, log_hyperprior, mode })
    }

    /// Unnormalized joint log density in the unconstrained hyperparameter
    /// coordinates; the MCMC target.
    pub fn log_joint(&self, xi: &[f64], theta: &[f64]) -> Result<f64> {
        let eta = self.hyper.from_unconstrained(theta);
        let prior = self.latent_prior(&eta)?;
        let lik = evaluate_likelihood(self.model, self.lik, xi)?;
        Ok(lik.value + prior.log_density(xi) + self.hyper.log_density_unconstrained(theta)?)
    }
}

/// Laplace log marginal of the Poisson model at `eta` with the default
/// priors, including the hyperprior density.
pub fn laplace_log_marginal(model: &LatentModel, eta: &HyperParameters, data: &MortalityDataset) -> Result<f64> {
    let lik = PoissonLikelihood::new(data);
    let problem = InferenceProblem::new(model, &lik, &PriorConfig::default())?;
    Ok(problem.laplace(eta, None)?.log_marginal)
}
