use super::data::MortalityDataset;
use super::laplace::InferenceProblem;
use super::likelihood::{Likelihood, PoissonLikelihood};
use super::mode::{ConditionalMode, NewtonOptions};
use super::model::LatentModel;
use super::optimize::{ccd_points, optimize_hyperparameters, OptimizeOptions};
use super::pattern::SharingPattern;
use crate::covariance::StructureKind;
use crate::error::{Error, Result};
use crate::priors::{HyperParameters, PriorConfig};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub newton: NewtonOptions,
    pub optimizer: OptimizeOptions,
    pub samples: usize,
    pub seed: u64,
    /// Mix over a small design around the optimum instead of plugging it in.
    pub integrate_hyperparameters: bool,
    pub init: Option<HyperParameters>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::default(),
            optimizer: OptimizeOptions::default(),
            samples: 1000,
            seed: 1,
            integrate_hyperparameters: false,
            init: None,
        }
    }
}

/// Fitted model: the hyperparameter optimum, the Gaussian approximation of
/// the latent posterior there, and draws from it.
#[derive(Debug, Clone)]
pub struct PosteriorFit {
    pub pattern: SharingPattern,
    pub structure: StructureKind,
    pub eta_hat: HyperParameters,
    pub log_marginal: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub latent_mean: Vec<f64>,
    /// Negative Hessian at the mode.
    pub latent_precision: DMatrix<f64>,
    /// One draw per row.
    pub samples: DMatrix<f64>,
    /// Stacked log rates of each draw.
    pub logrates_samples: DMatrix<f64>,
    /// Posterior mean and variance of the population baseline mean.
    pub nu0_mean: [f64; 3],
    pub nu0_var: [f64; 3],
}

impl PosteriorFit {
    pub fn label(&self) -> String {
        format!("{}-{}", self.pattern, self.structure.label())
    }

    /// Posterior mean log rate per stacked cell.
    pub fn mean_log_rates(&self) -> Vec<f64> {
        self.logrates_samples.row_mean().iter().copied().collect()
    }

    /// Empirical quantile of the log rate at each stacked cell.
    pub fn log_rate_quantile(&self, p: f64) -> Vec<f64> {
        (0..self.logrates_samples.ncols()).map(|k| quantile(self.logrates_samples.column(k).iter().copied(), p)).collect()
    }
}

/// Linear-interpolation quantile of a sample.
pub fn quantile(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let h = p.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// `n` draws from `N(mode, H^-1)`, one per row.
pub fn gaussian_draws<R: rand::Rng>(mode: &ConditionalMode, n: usize, rng: &mut R) -> DMatrix<f64> {
    let d = mode.xi.len();
    let lt = mode.chol.l().transpose();
    let mut out = DMatrix::zeros(n, d);
    for s in 0..n {
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let e = lt.solve_upper_triangular(&z).expect("Cholesky factor is nonsingular");
        for k in 0..d {
            out[(s, k)] = mode.xi[k] + e[k];
        }
    }
    out
}

fn build_fit<L: Likelihood + ?Sized>(
    problem: &InferenceProblem<'_, L>,
    eta: &HyperParameters,
    mode: &ConditionalMode,
    log_marginal: f64,
    samples: DMatrix<f64>,
) -> Result<PosteriorFit> {
    let model = problem.model();
    let logrates_samples = model.log_rates_rows(&samples)?;
    let (nu0_mean, nu0_var) = if model.layout(super::Block::Baseline).shared {
        let l = model.layout(super::Block::Baseline);
        let cov = mode.chol.inverse();
        let mut m = [0.0; 3];
        let mut v = [0.0; 3];
        for c in 0..3 {
            m[c] = mode.xi[l.offset + c];
            v[c] = cov[(l.offset + c, l.offset + c)];
        }
        (m, v)
    } else {
        // law of total variance over the latent draws
        let mut means = Vec::with_capacity(samples.nrows());
        let mut inner = [0.0; 3];
        for s in 0..samples.nrows() {
            let xi: Vec<f64> = samples.row(s).iter().copied().collect();
            let (m, v) = model.nu0_conditional(&xi, eta, &problem.priors().baseline_mean)?;
            means.push(m);
            for c in 0..3 {
                inner[c] += v[c];
            }
        }
        let n = means.len().max(1) as f64;
        let mut m = [0.0; 3];
        let mut v = [0.0; 3];
        for c in 0..3 {
            m[c] = means.iter().map(|x| x[c]).sum::<f64>() / n;
            let between = means.iter().map(|x| (x[c] - m[c]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            v[c] = inner[c] / n + between;
        }
        (m, v)
    };
    Ok(PosteriorFit {
        pattern: model.pattern(),
        structure: model.structure_kind(),
        eta_hat: eta.clone(),
        log_marginal,
        evaluations: 0,
        converged: true,
        latent_mean: mode.xi.clone(),
        latent_precision: mode.hessian.clone(),
        samples,
        logrates_samples,
        nu0_mean,
        nu0_var,
    })
}

/// Empirical-Bayes plug-in posterior at `eta_hat`: `n` draws from the
/// Gaussian approximation at the conditional mode.
pub fn sample_posterior<L: Likelihood + ?Sized>(
    problem: &InferenceProblem<'_, L>,
    eta_hat: &HyperParameters,
    n: usize,
    seed: u64,
) -> Result<PosteriorFit> {
    let ev = problem.laplace(eta_hat, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = gaussian_draws(&ev.mode, n, &mut rng);
    build_fit(problem, eta_hat, &ev.mode, ev.log_marginal, samples)
}

/// Optimize the hyperparameters and sample the latent posterior.
pub fn fit_problem<L: Likelihood + ?Sized>(problem: &InferenceProblem<'_, L>, opts: &FitOptions) -> Result<PosteriorFit> {
    if opts.samples < 2 {
        return Err(Error::Domain("at least two posterior samples are needed".into()));
    }
    let init = opts.init.clone().unwrap_or_else(|| problem.model().default_hyperparameters());
    let opt = optimize_hyperparameters(problem, &init, &opts.optimizer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let samples = if opts.integrate_hyperparameters {
        let points = ccd_points(problem, &opt)?;
        let mut rows = Vec::new();
        let mut taken = 0;
        for (k, p) in points.iter().enumerate() {
            let count = if k + 1 == points.len() {
                opts.samples - taken
            } else {
                ((p.weight * opts.samples as f64).round() as usize).min(opts.samples - taken)
            };
            taken += count;
            if count > 0 {
                rows.push(gaussian_draws(&p.laplace.mode, count, &mut rng));
            }
        }
        let d = problem.model().free_dim();
        let mut all = DMatrix::zeros(opts.samples, d);
        let mut at = 0;
        for m in rows {
            all.rows_mut(at, m.nrows()).copy_from(&m);
            at += m.nrows();
        }
        all
    } else {
        gaussian_draws(&opt.laplace.mode, opts.samples, &mut rng)
    };
    let mut fit = build_fit(problem, &opt.eta, &opt.laplace.mode, opt.laplace.log_marginal, samples)?;
    fit.evaluations = opt.evaluations;
    fit.converged = opt.converged;
    Ok(fit)
}

/// Fit a Poisson model to mortality data.
pub fn fit_model(model: &LatentModel, data: &MortalityDataset, priors: &PriorConfig, opts: &FitOptions) -> Result<PosteriorFit> {
    if data.grid() != model.grid() || data.strata() != model.strata() {
        return Err(Error::Dimension("dataset and model dimensions differ".into()));
    }
    let lik = PoissonLikelihood::new(data);
    let problem = InferenceProblem::new(model, &lik, priors)?.with_newton(opts.newton);
    fit_problem(&problem, opts)
}
