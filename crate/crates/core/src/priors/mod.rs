//! Hyperpriors: elicited exponential priors on precisions, correlation
//! priors, the informative baseline-mean prior, and prior-predictive checks.

mod baseline_mean;
mod elicitation;
mod hyper;
mod pc;
mod predictive;

pub use baseline_mean::BaselineMeanPrior;
pub use elicitation::{elicit_precision_rate, t2_quantile, PrecisionElicitation, RESIDUAL_VARIANCE_MULTIPLE};
pub use hyper::{hyperprior_logpdf, HyperParam, HyperParameters, HyperPrior, PriorConfig, RhoPrior};
pub use pc::PcPriorBym2;
pub use predictive::{sample_prior_predictive, PriorPredictiveSummary};
