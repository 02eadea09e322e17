//! Stratified latent Gaussian model and its posterior: conditional modes,
//! the Laplace marginal, hyperparameter search, sampling and an MCMC check.

mod data;
mod laplace;
mod likelihood;
mod mcmc;
mod mode;
mod model;
mod optimize;
mod pattern;
mod posterior;

pub use data::MortalityDataset;
pub use laplace::{laplace_log_marginal, InferenceProblem, LaplaceEval};
pub use likelihood::{evaluate_likelihood, poisson_loglik, CellTerm, GaussianLikelihood, Likelihood, LikelihoodEval, PoissonLikelihood};
pub use mcmc::{effective_sample_size, mcmc_oracle, McmcOptions, McmcOutput, ESS_THRESHOLD};
pub use mode::{conditional_mode, initial_latent, ConditionalMode, NewtonOptions};
pub use model::{assemble_model, BlockLayout, LatentModel, LatentPrior, PriorPiece};
pub use optimize::{ccd_points, nelder_mead, optimize_hyperparameters, optimize_subset, MinimizeResult, OptimizeOptions, OptimizeResult, WeightedPoint};
pub use pattern::{Block, SharingPattern};
pub use posterior::{fit_model, fit_problem, gaussian_draws, quantile, sample_posterior, FitOptions, PosteriorFit};
