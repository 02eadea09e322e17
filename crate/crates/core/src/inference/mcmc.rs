use super::laplace::InferenceProblem;
use super::likelihood::{evaluate_likelihood, Likelihood};
use crate::error::Result;
use crate::priors::HyperParameters;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Effective sample size below which mixing is flagged.
pub const ESS_THRESHOLD: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcOptions {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Starting hyperparameters; the model default when absent.
    pub init: Option<HyperParameters>,
    /// Hold the hyperparameters at `init` and sample only the latent field.
    pub fix_hyperparameters: bool,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self { iterations: 20_000, burn_in: 5_000, thin: 5, seed: 1, init: None, fix_hyperparameters: false }
    }
}

#[derive(Debug, Clone)]
pub struct McmcOutput {
    /// Kept latent draws, one per row.
    pub latent: DMatrix<f64>,
    /// Kept hyperparameter draws in transformed coordinates.
    pub theta: DMatrix<f64>,
    pub latent_acceptance: f64,
    pub hyper_acceptance: Vec<f64>,
    /// Smallest effective sample size over the latent coordinates.
    pub min_ess: f64,
    pub poor_mixing: bool,
}

impl McmcOutput {
    pub fn latent_mean(&self) -> Vec<f64> {
        self.latent.row_mean().iter().copied().collect()
    }
}

/// Adaptive random-walk Metropolis within blocks: the latent vector moves
/// as one block with proposals shaped by the negative Hessian at the initial
/// conditional mode; each transformed hyperparameter moves on its own.
/// Proposal scales adapt during burn-in only.
pub fn mcmc_oracle<L: Likelihood + ?Sized>(problem: &InferenceProblem<'_, L>, opts: &McmcOptions) -> Result<McmcOutput> {
    let model = problem.model();
    let hyper = problem.hyper_prior();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let eta0 = opts.init.clone().unwrap_or_else(|| model.default_hyperparameters());
    let mut theta = hyper.to_unconstrained(&eta0)?;
    let start = problem.mode(&eta0, None)?;
    let d = model.free_dim();
    let lt = start.chol.l().transpose();
    let mut xi = start.xi.clone();

    let mut lik = evaluate_likelihood(model, problem.likelihood(), &xi)?.value;
    let mut prior = problem.latent_prior(&hyper.from_unconstrained(&theta))?;
    let mut prior_val = prior.log_density(&xi);
    let mut hyper_val = hyper.log_density_unconstrained(&theta)?;

    let mut latent_scale = 2.38 / (d as f64).sqrt();
    let mut hyper_scale = vec![0.5; theta.len()];
    let (mut lat_acc, mut lat_tries) = (0usize, 0usize);
    let mut hyp_acc = vec![0usize; theta.len()];
    let mut hyp_tries = vec![0usize; theta.len()];
    let (mut batch_lat, mut batch_hyp) = (0usize, vec![0usize; theta.len()]);
    const BATCH: usize = 50;

    let mut kept_latent = Vec::new();
    let mut kept_theta = Vec::new();
    let total = opts.burn_in + opts.iterations;
    for it in 0..total {
        let adapting = it < opts.burn_in;

        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let step = lt.solve_upper_triangular(&z).expect("Cholesky factor is nonsingular");
        let prop: Vec<f64> = xi.iter().zip(step.iter()).map(|(a, s)| a + latent_scale * s).collect();
        if let Ok(e) = evaluate_likelihood(model, problem.likelihood(), &prop) {
            let p = prior.log_density(&prop);
            let log_ratio = e.value + p - lik - prior_val;
            if rng.random::<f64>().ln() < log_ratio {
                xi = prop;
                lik = e.value;
                prior_val = p;
                if adapting {
                    batch_lat += 1;
                } else {
                    lat_acc += 1;
                }
            }
        }
        if !adapting {
            lat_tries += 1;
        }

        if !opts.fix_hyperparameters {
            for k in 0..theta.len() {
                let mut t = theta.clone();
                let z: f64 = StandardNormal.sample(&mut rng);
                t[k] += hyper_scale[k] * z;
                let eta = hyper.from_unconstrained(&t);
                let Ok(hv) = hyper.log_density_unconstrained(&t) else { continue };
                let Ok(pr) = problem.latent_prior(&eta) else { continue };
                let pv = pr.log_density(&xi);
                if !(pv.is_finite() && hv.is_finite()) {
                    continue;
                }
                if rng.random::<f64>().ln() < pv + hv - prior_val - hyper_val {
                    theta = t;
                    prior = pr;
                    prior_val = pv;
                    hyper_val = hv;
                    if adapting {
                        batch_hyp[k] += 1;
                    } else {
                        hyp_acc[k] += 1;
                    }
                }
                if !adapting {
                    hyp_tries[k] += 1;
                }
            }
        }

        if adapting && (it + 1) % BATCH == 0 {
            let nudge = 1.0 / ((it + 1) as f64 / BATCH as f64).sqrt().max(1.0);
            let rate = batch_lat as f64 / BATCH as f64;
            latent_scale *= ((rate - 0.234) * nudge * 2.0).exp();
            for k in 0..theta.len() {
                let r = batch_hyp[k] as f64 / BATCH as f64;
                hyper_scale[k] *= ((r - 0.44) * nudge * 2.0).exp();
                batch_hyp[k] = 0;
            }
            batch_lat = 0;
        }

        if !adapting && (it - opts.burn_in).is_multiple_of(opts.thin.max(1)) {
            kept_latent.push(xi.clone());
            kept_theta.push(theta.clone());
        }
    }

    let n = kept_latent.len();
    let latent = DMatrix::from_fn(n, d, |s, k| kept_latent[s][k]);
    let theta_m = DMatrix::from_fn(n, theta.len(), |s, k| kept_theta[s][k]);
    let min_ess = (0..d).map(|k| effective_sample_size(&latent.column(k).iter().copied().collect::<Vec<_>>())).fold(f64::INFINITY, f64::min);
    Ok(McmcOutput {
        latent,
        theta: theta_m,
        latent_acceptance: lat_acc as f64 / lat_tries.max(1) as f64,
        hyper_acceptance: hyp_acc.iter().zip(&hyp_tries).map(|(a, t)| *a as f64 / (*t).max(1) as f64).collect(),
        min_ess,
        poor_mixing: min_ess < ESS_THRESHOLD,
    })
}

/// `n / (1 + 2 sum rho_k)`, summing autocorrelations in adjacent pairs while
/// the pair sums stay positive.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| -> f64 {
        (0..n - lag).map(|t| (x[t] - mean) * (x[t + lag] - mean)).sum::<f64>() / (n as f64 * var)
    };
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    n as f64 / (1.0 + 2.0 * sum)
}
