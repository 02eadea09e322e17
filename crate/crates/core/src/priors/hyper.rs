use super::baseline_mean::BaselineMeanPrior;
use super::elicitation::PrecisionElicitation;
use super::pc::PcPriorBym2;
use crate::covariance::CorrelationFamily;
use crate::error::{Error, Result};
use crate::inference::Block;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// One scalar hyperparameter of a latent model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HyperParam {
    Tau(Block),
    Rho(Block),
}

impl fmt::Display for HyperParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperParam::Tau(b) => write!(f, "tau_{}", b.symbol()),
            HyperParam::Rho(b) => write!(f, "rho_{}", b.symbol()),
        }
    }
}

/// Precisions and correlations per block; `None` where a block has no such
/// parameter under the fitted model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperParameters {
    pub tau: [Option<f64>; 4],
    pub rho: [Option<f64>; 4],
}

impl HyperParameters {
    pub fn get(&self, p: HyperParam) -> Option<f64> {
        match p {
            HyperParam::Tau(b) => self.tau[b.index()],
            HyperParam::Rho(b) => self.rho[b.index()],
        }
    }

    pub fn set(&mut self, p: HyperParam, v: f64) {
        match p {
            HyperParam::Tau(b) => self.tau[b.index()] = Some(v),
            HyperParam::Rho(b) => self.rho[b.index()] = Some(v),
        }
    }

    pub fn with(mut self, p: HyperParam, v: f64) -> Self {
        self.set(p, v);
        self
    }

    pub fn tau_of(&self, b: Block) -> Option<f64> {
        self.tau[b.index()]
    }

    pub fn rho_of(&self, b: Block) -> Option<f64> {
        self.rho[b.index()]
    }
}

fn default_q() -> f64 {
    0.05
}

/// Prior settings, as read from the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub epsilon_baseline: f64,
    pub epsilon_age: f64,
    pub epsilon_period: f64,
    pub epsilon_cohort: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    pub baseline_mean: BaselineMeanPrior,
    /// Variance of the normal prior on `log((1 + rho (R-1)) / (1 - rho))`.
    pub exchangeable_zeta_variance: f64,
    /// BYM2 calibration `Pr(rho < pc_threshold) = pc_probability`.
    pub pc_threshold: f64,
    pub pc_probability: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            epsilon_baseline: 1.05f64.ln(),
            epsilon_age: 1.2f64.ln(),
            epsilon_period: 1.1f64.ln(),
            epsilon_cohort: 1.01f64.ln(),
            q: default_q(),
            baseline_mean: BaselineMeanPrior::default(),
            exchangeable_zeta_variance: 5.0,
            pc_threshold: 0.5,
            pc_probability: 0.5,
        }
    }
}

impl PriorConfig {
    pub fn epsilon(&self, b: Block) -> f64 {
        match b {
            Block::Baseline => self.epsilon_baseline,
            Block::Age => self.epsilon_age,
            Block::Period => self.epsilon_period,
            Block::Cohort => self.epsilon_cohort,
        }
    }

    pub fn tau_rate(&self, b: Block) -> Result<f64> {
        Ok(PrecisionElicitation::new(self.epsilon(b), self.q)?.rate())
    }
}

#[derive(Debug, Clone)]
pub enum RhoPrior {
    None,
    Exchangeable { strata: usize, zeta_variance: f64 },
    Bym2(PcPriorBym2),
}

/// Joint hyperprior of one latent model, with the unconstrained
/// reparameterization used by the optimizer and the MCMC oracle.
#[derive(Debug, Clone)]
pub struct HyperPrior {
    params: Vec<HyperParam>,
    rates: [f64; 4],
    rho_prior: RhoPrior,
}

impl HyperPrior {
    pub fn new(params: Vec<HyperParam>, family: &CorrelationFamily, strata: usize, config: &PriorConfig) -> Result<Self> {
        let mut rates = [0.0; 4];
        for b in Block::ALL {
            rates[b.index()] = config.tau_rate(b)?;
        }
        let rho_prior = match family {
            CorrelationFamily::Independent => RhoPrior::None,
            CorrelationFamily::Exchangeable => {
                if !(config.exchangeable_zeta_variance > 0.0) {
                    return Err(Error::Domain("exchangeable prior variance must be positive".into()));
                }
                RhoPrior::Exchangeable { strata, zeta_variance: config.exchangeable_zeta_variance }
            }
            CorrelationFamily::Bym2(icar) => {
                RhoPrior::Bym2(PcPriorBym2::new(icar, config.pc_threshold, config.pc_probability)?)
            }
        };
        if params.iter().any(|p| matches!(p, HyperParam::Rho(_))) && matches!(rho_prior, RhoPrior::None) {
            return Err(Error::Model("correlation parameters need a correlated structure".into()));
        }
        Ok(Self { params, rates, rho_prior })
    }

    pub fn params(&self) -> &[HyperParam] {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn tau_rate(&self, b: Block) -> f64 {
        self.rates[b.index()]
    }

    pub fn rho_prior(&self) -> &RhoPrior {
        &self.rho_prior
    }

    fn value(&self, eta: &HyperParameters, p: HyperParam) -> Result<f64> {
        eta.get(p).ok_or_else(|| Error::Domain(format!("missing hyperparameter {p}")))
    }

    /// Log prior density of each active parameter, natural scale.
    pub fn component_log_densities(&self, eta: &HyperParameters) -> Result<Vec<f64>> {
        self.params
            .iter()
            .map(|&p| {
                let v = self.value(eta, p)?;
                match p {
                    HyperParam::Tau(b) => {
                        if !(v > 0.0 && v.is_finite()) {
                            return Err(Error::Domain(format!("{p} = {v} is not a positive precision")));
                        }
                        let rate = self.rates[b.index()];
                        Ok(rate.ln() - rate * v)
                    }
                    HyperParam::Rho(_) => self.rho_log_density(v),
                }
            })
            .collect()
    }

    fn rho_log_density(&self, rho: f64) -> Result<f64> {
        match &self.rho_prior {
            RhoPrior::None => Err(Error::Model("no correlation prior".into())),
            RhoPrior::Exchangeable { strata, zeta_variance } => {
                let r = *strata as f64;
                if !(rho > -1.0 / (r - 1.0) && rho < 1.0) {
                    return Err(Error::Domain(format!("exchangeable rho {rho} outside its domain")));
                }
                let zeta = ((1.0 + rho * (r - 1.0)) / (1.0 - rho)).ln();
                let jac = (r - 1.0) / (1.0 + rho * (r - 1.0)) + 1.0 / (1.0 - rho);
                Ok(normal_logpdf(zeta, *zeta_variance) + jac.ln())
            }
            RhoPrior::Bym2(pc) => pc.log_density(rho),
        }
    }

    pub fn log_density(&self, eta: &HyperParameters) -> Result<f64> {
        Ok(self.component_log_densities(eta)?.iter().sum())
    }

    pub fn to_unconstrained(&self, eta: &HyperParameters) -> Result<Vec<f64>> {
        self.params
            .iter()
            .map(|&p| {
                let v = self.value(eta, p)?;
                Ok(match p {
                    HyperParam::Tau(_) => v.ln(),
                    HyperParam::Rho(_) => match &self.rho_prior {
                        RhoPrior::Exchangeable { strata, .. } => {
                            let r = *strata as f64;
                            ((1.0 + v * (r - 1.0)) / (1.0 - v)).ln()
                        }
                        _ => (v / (1.0 - v)).ln(),
                    },
                })
            })
            .collect()
    }

    pub fn from_unconstrained(&self, theta: &[f64]) -> HyperParameters {
        let mut eta = HyperParameters::default();
        for (&p, &t) in self.params.iter().zip(theta) {
            let v = match p {
                HyperParam::Tau(_) => t.exp(),
                HyperParam::Rho(_) => match &self.rho_prior {
                    RhoPrior::Exchangeable { strata, .. } => {
                        let e = t.exp();
                        if e.is_infinite() {
                            1.0
                        } else {
                            (e - 1.0) / (e + *strata as f64 - 1.0)
                        }
                    }
                    _ => 1.0 / (1.0 + (-t).exp()),
                },
            };
            eta.set(p, v);
        }
        eta
    }

    /// `sum log |d eta / d theta|`.
    pub fn log_jacobian(&self, theta: &[f64]) -> f64 {
        self.params
            .iter()
            .zip(theta)
            .map(|(&p, &t)| match p {
                HyperParam::Tau(_) => t,
                HyperParam::Rho(_) => match &self.rho_prior {
                    RhoPrior::Exchangeable { strata, .. } => {
                        let r = *strata as f64;
                        // d rho / d zeta = R e^z / (e^z + R - 1)^2
                        r.ln() + t - 2.0 * (t.exp() + r - 1.0).ln()
                    }
                    _ => -(1.0 + (-t).exp()).ln() - (1.0 + t.exp()).ln(),
                },
            })
            .sum()
    }

    /// Log density of the unconstrained coordinates.
    pub fn log_density_unconstrained(&self, theta: &[f64]) -> Result<f64> {
        let eta = self.from_unconstrained(theta);
        Ok(self.log_density(&eta)? + self.log_jacobian(theta))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HyperParameters {
        let mut eta = HyperParameters::default();
        for &p in &self.params {
            let v = match p {
                HyperParam::Tau(b) => Exp::new(self.rates[b.index()]).expect("positive rate").sample(rng),
                HyperParam::Rho(_) => match &self.rho_prior {
                    RhoPrior::Exchangeable { strata, zeta_variance } => {
                        let z = Normal::new(0.0, zeta_variance.sqrt()).expect("positive variance").sample(rng);
                        let e = z.exp();
                        (e - 1.0) / (e + *strata as f64 - 1.0)
                    }
                    RhoPrior::Bym2(pc) => pc.quantile(rng.random::<f64>()),
                    RhoPrior::None => unreachable!("checked at construction"),
                },
            };
            eta.set(p, v);
        }
        eta
    }
}

fn normal_logpdf(x: f64, variance: f64) -> f64 {
    -0.5 * ((2.0 * PI * variance).ln() + x * x / variance)
}

/// Sum of the hyperprior log densities of the active parameters.
pub fn hyperprior_logpdf(eta: &HyperParameters, prior: &HyperPrior) -> Result<f64> {
    prior.log_density(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{AdjacencyGraph, ScaledIcar};
    use std::sync::Arc;

    fn exch_prior(strata: usize) -> HyperPrior {
        HyperPrior::new(
            vec![HyperParam::Tau(Block::Period), HyperParam::Rho(Block::Period)],
            &CorrelationFamily::Exchangeable,
            strata,
            &PriorConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn tau_at_exponential_mean() {
        let prior = HyperPrior::new(vec![HyperParam::Tau(Block::Age)], &CorrelationFamily::Independent, 3, &PriorConfig::default())
            .unwrap();
        let rate = prior.tau_rate(Block::Age);
        let eta = HyperParameters::default().with(HyperParam::Tau(Block::Age), 1.0 / rate);
        assert!((prior.log_density(&eta).unwrap() - (rate.ln() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn exchangeable_rho_zero_closed_form() {
        let prior = exch_prior(25);
        let rate = prior.tau_rate(Block::Period);
        let eta = HyperParameters::default().with(HyperParam::Tau(Block::Period), 1.0 / rate).with(HyperParam::Rho(Block::Period), 0.0);
        let comps = prior.component_log_densities(&eta).unwrap();
        // zeta = 0, |d zeta / d rho| = R at rho = 0
        let expected = -0.5 * (2.0 * PI * 5.0).ln() + 25f64.ln();
        assert!((comps[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn unconstrained_round_trip_and_jacobian() {
        let icar = Arc::new(ScaledIcar::from_graph(&AdjacencyGraph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap()).unwrap());
        for family in [CorrelationFamily::Exchangeable, CorrelationFamily::Bym2(icar)] {
            let prior = HyperPrior::new(
                vec![HyperParam::Tau(Block::Cohort), HyperParam::Rho(Block::Cohort)],
                &family,
                4,
                &PriorConfig::default(),
            )
            .unwrap();
            let eta = HyperParameters::default().with(HyperParam::Tau(Block::Cohort), 40.0).with(HyperParam::Rho(Block::Cohort), 0.3);
            let theta = prior.to_unconstrained(&eta).unwrap();
            let back = prior.from_unconstrained(&theta);
            assert!((back.rho_of(Block::Cohort).unwrap() - 0.3).abs() < 1e-12);
            assert!((back.tau_of(Block::Cohort).unwrap() - 40.0).abs() < 1e-10);
            // numerical Jacobian of the rho coordinate
            let h = 1e-6;
            let mut up = theta.clone();
            up[1] += h;
            let mut dn = theta.clone();
            dn[1] -= h;
            let d = (prior.from_unconstrained(&up).rho_of(Block::Cohort).unwrap()
                - prior.from_unconstrained(&dn).rho_of(Block::Cohort).unwrap())
                / (2.0 * h);
            let analytic = prior.log_jacobian(&theta) - theta[0];
            assert!((analytic - d.ln()).abs() < 1e-7);
        }
    }

    #[test]
    fn exchangeable_unconstrained_density_is_the_normal() {
        let prior = exch_prior(6);
        let theta = [2.0_f64.ln(), 0.7];
        let lp = prior.log_density_unconstrained(&theta).unwrap();
        let rate = prior.tau_rate(Block::Period);
        let expected = rate.ln() - rate * 2.0 + 2f64.ln() + normal_logpdf(0.7, 5.0);
        assert!((lp - expected).abs() < 1e-10);
    }

    #[test]
    fn domain_violations_reported() {
        let prior = exch_prior(3);
        let eta = HyperParameters::default().with(HyperParam::Tau(Block::Period), 1.0).with(HyperParam::Rho(Block::Period), -0.5);
        assert!(prior.log_density(&eta).is_err());
        let eta = HyperParameters::default().with(HyperParam::Rho(Block::Period), 0.1);
        assert!(prior.log_density(&eta).is_err());
    }
}
